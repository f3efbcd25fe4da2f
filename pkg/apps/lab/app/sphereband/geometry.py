from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from app.errors import ParameterError

MIN_POINTS = 100
_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BandSpec:
    """
    S² 上的轴对称区域：纬带 {θ₁ < θ < θ₂} 或极冠 {0 ≤ θ < θ₀}（θ 为余纬）。

    极冠用 theta1 = 0 表示，此时只有一条边界圆 θ = theta2。
    """

    theta1: float
    theta2: float
    n_points: int = 2000

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < MIN_POINTS:
            raise ParameterError(f"网格点数至少为 {MIN_POINTS}，实际为 {self.n_points}")
        if self.theta1 == 0.0:
            if not 0 < self.theta2 < math.pi:
                raise ParameterError(f"极冠要求 0 < θ₀ < π，实际 θ₀={self.theta2}")
        elif not 0 < self.theta1 < self.theta2 < math.pi:
            raise ParameterError(
                f"纬带要求 0 < θ₁ < θ₂ < π，实际 θ₁={self.theta1}, θ₂={self.theta2}"
            )

    @classmethod
    def band(cls, theta1: float, theta2: float, n_points: int = 2000) -> BandSpec:
        if theta1 <= 0:
            raise ParameterError(f"纬带要求 θ₁ > 0，实际 θ₁={theta1}")
        return cls(theta1, theta2, n_points)

    @classmethod
    def cap(cls, theta0: float, n_points: int = 2000) -> BandSpec:
        return cls(0.0, theta0, n_points)

    @classmethod
    def symmetric(cls, r: float, n_points: int = 2000) -> BandSpec:
        """赤道对称纬带 |cos θ| < r。"""
        if not 0 < r < 1:
            raise ParameterError(f"对称纬带要求 0 < r < 1，实际 r={r}")
        theta1 = math.acos(r)
        return cls(theta1, math.pi - theta1, n_points)

    @property
    def is_cap(self) -> bool:
        return self.theta1 == 0.0

    @property
    def symmetric_flag(self) -> bool:
        return not self.is_cap and abs(self.theta1 + self.theta2 - math.pi) <= _SYMMETRY_TOL

    @property
    def circles(self) -> tuple[float, ...]:
        """边界圆的余纬。"""
        return (self.theta2,) if self.is_cap else (self.theta1, self.theta2)

    @property
    def area(self) -> float:
        """球面上的面积 2π(cos θ₁ − cos θ₂)。"""
        return 2.0 * math.pi * (math.cos(self.theta1) - math.cos(self.theta2))

    @property
    def h(self) -> float:
        """网格的最大余纬步长。"""
        return float(np.diff(self.grid()).max())

    def grid(self) -> np.ndarray:
        theta = np.linspace(self.theta1, self.theta2, self.n_points)
        if self.symmetric_flag:
            # 对称纬带的网格关于赤道逐点镜像
            half = self.n_points // 2
            theta[self.n_points - half :] = math.pi - theta[:half][::-1]
            if self.n_points % 2:
                theta[half] = 0.5 * math.pi
        return theta

    def parameters(self) -> dict[str, object]:
        params: dict[str, object] = {"n_points": self.n_points}
        if self.is_cap:
            params["theta0"] = self.theta2
        else:
            params.update(theta1=self.theta1, theta2=self.theta2)
        return params
