from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from app.errors import ParameterError


class Family(str, enum.Enum):
    """区域形状族。"""

    DISK = "disk"
    ELLIPSE = "ellipse"
    ANNULUS = "annulus"
    RADIAL = "radial"
    POLYGON = "polygon"


@dataclass(frozen=True)
class DomainSpec:
    """
    平面区域的声明式描述：形状族、形状参数与名义边长 target_h。

    各形状族使用的字段：
        disk     -> radius
        ellipse  -> a, b
        annulus  -> inner_radius, radius
        radial   -> epsilon, mode      （r(θ) = 1 + ε·cos(mθ)）
        polygon  -> vertices

    interface_radius 可选：以原点为圆心、半径为 ρ 的圆作为协调的内部界面插入网格。
    """

    family: Family
    target_h: float
    radius: float = 1.0
    a: float = 1.0
    b: float = 1.0
    inner_radius: float = 0.5
    epsilon: float = 0.0
    mode: int = 1
    vertices: tuple[tuple[float, float], ...] = field(default_factory=tuple)
    interface_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.target_h > 0 and math.isfinite(self.target_h)):
            raise ParameterError(f"target_h 必须为正数，实际为 {self.target_h}")

        if self.family is Family.DISK:
            _require_positive(radius=self.radius)
        elif self.family is Family.ELLIPSE:
            _require_positive(a=self.a, b=self.b)
        elif self.family is Family.ANNULUS:
            _require_positive(inner_radius=self.inner_radius, radius=self.radius)
            if self.inner_radius >= self.radius:
                raise ParameterError(
                    f"圆环要求 0 < r < R，实际 r={self.inner_radius}, R={self.radius}"
                )
        elif self.family is Family.RADIAL:
            if not abs(self.epsilon) < 1:
                raise ParameterError(f"径向扰动要求 |ε| < 1，实际 ε={self.epsilon}")
            if int(self.mode) != self.mode or self.mode < 1:
                raise ParameterError(f"径向扰动的模数 m 必须是正整数，实际 m={self.mode}")
        elif self.family is Family.POLYGON:
            if len(self.vertices) < 3:
                raise ParameterError("多边形至少需要 3 个顶点")
            object.__setattr__(
                self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices)
            )

        if self.interface_radius is not None:
            self._validate_interface(self.interface_radius)

    def _validate_interface(self, rho: float) -> None:
        if self.family is Family.POLYGON:
            raise ParameterError("多边形区域不支持内部界面")
        if not rho > 0:
            raise ParameterError(f"界面半径必须为正数，实际 ρ={rho}")
        if self.family is Family.ANNULUS:
            if not self.inner_radius < rho < self.radius:
                raise ParameterError(
                    f"圆环内的界面要求 r < ρ < R，实际 r={self.inner_radius}, "
                    f"ρ={rho}, R={self.radius}"
                )
            return
        if not rho < self.inradius:
            raise ParameterError(
                f"界面圆 ρ={rho} 的闭包必须严格位于区域内部（内切半径 {self.inradius}）"
            )

    # --- 便捷构造 ---
    @classmethod
    def disk(cls, radius: float = 1.0, target_h: float = 0.05, **kwargs) -> DomainSpec:
        return cls(Family.DISK, target_h, radius=radius, **kwargs)

    @classmethod
    def ellipse(cls, a: float, b: float, target_h: float = 0.05, **kwargs) -> DomainSpec:
        return cls(Family.ELLIPSE, target_h, a=a, b=b, **kwargs)

    @classmethod
    def annulus(
        cls, inner_radius: float, radius: float, target_h: float = 0.05, **kwargs
    ) -> DomainSpec:
        return cls(Family.ANNULUS, target_h, inner_radius=inner_radius, radius=radius, **kwargs)

    @classmethod
    def radial(cls, epsilon: float, mode: int, target_h: float = 0.05, **kwargs) -> DomainSpec:
        return cls(Family.RADIAL, target_h, epsilon=epsilon, mode=mode, **kwargs)

    @classmethod
    def polygon(cls, vertices, target_h: float = 0.05) -> DomainSpec:
        return cls(Family.POLYGON, target_h, vertices=tuple(map(tuple, vertices)))

    # --- 几何量 ---
    @property
    def smooth(self) -> bool:
        """除多边形外的所有形状族边界都是光滑的解析曲线。"""
        return self.family is not Family.POLYGON

    @property
    def simply_connected(self) -> bool:
        return self.family is not Family.ANNULUS

    @property
    def inradius(self) -> float:
        """以原点为中心、完全含于区域内的最大圆半径（圆环返回外半径）。"""
        if self.family is Family.DISK or self.family is Family.ANNULUS:
            return self.radius
        if self.family is Family.ELLIPSE:
            return min(self.a, self.b)
        if self.family is Family.RADIAL:
            return 1.0 - abs(self.epsilon)
        raise ParameterError("多边形区域没有定义以原点为中心的内切圆")

    def parameters(self) -> dict[str, object]:
        """当前形状族实际使用的参数，用于报告和配置哈希。"""
        params: dict[str, object] = {"family": self.family.value, "target_h": self.target_h}
        if self.family is Family.DISK:
            params["radius"] = self.radius
        elif self.family is Family.ELLIPSE:
            params.update(a=self.a, b=self.b)
        elif self.family is Family.ANNULUS:
            params.update(inner_radius=self.inner_radius, radius=self.radius)
        elif self.family is Family.RADIAL:
            params.update(epsilon=self.epsilon, mode=self.mode)
        else:
            params["vertices"] = [list(v) for v in self.vertices]
        if self.interface_radius is not None:
            params["interface_radius"] = self.interface_radius
        return params


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise ParameterError(f"形状参数 {name} 必须为正数，实际为 {value}")
