from __future__ import annotations

import abc
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import shapely
import structlog
from scipy import integrate, special
from scipy.spatial import Delaunay

from app.errors import MeshError, ParameterError
from app.geometry.domains import DomainSpec, Family

logger = structlog.get_logger(__name__)

# 径向层距与周向弧长都取 target_h / _SPACING_SAFETY，保证最长边（层间对角线）不超过 1.5·target_h。
_SPACING_SAFETY = 1.2
# 每一层的顶点数取 12 的倍数且都从 θ=0 开始，圆盘网格因此保持十二阶二面体对称，
# 角向阶数 m ≤ 5 的特征值对在离散层面严格二重。
_RING_MULTIPLE = 12
_GAP_SAMPLES = 720


@dataclass(frozen=True)
class RawMesh:
    """形状族构造出的原始三角剖分，尚未提取边界拓扑。"""

    vertices: np.ndarray
    triangles: np.ndarray
    interface_loops: tuple[np.ndarray, ...] = ()


@dataclass(frozen=True)
class _Curve:
    """以 θ ∈ [0, 2π) 参数化、关于原点星形的闭曲线。"""

    evaluate: Callable[[np.ndarray], np.ndarray]
    speed_max: float
    radius_max: float


def _polar(theta: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _circle(radius: float) -> _Curve:
    return _Curve(lambda th: _polar(th, np.full_like(th, radius)), radius, radius)


def _ring_angles(speed: float, h: float) -> np.ndarray:
    per_sector = math.ceil(2.0 * math.pi * _SPACING_SAFETY * speed / (_RING_MULTIPLE * h))
    n = _RING_MULTIPLE * max(1, per_sector)
    return 2.0 * math.pi * np.arange(n) / n


def _stitch(inner: np.ndarray, outer: np.ndarray) -> np.ndarray:
    """按参数角归并相邻两层顶点，生成两层之间的条带三角形（方向稍后统一修正）。"""
    nb = outer.size
    if inner.size == 1:
        j = np.arange(nb)
        return np.column_stack([np.full(nb, inner[0]), outer[j], outer[(j + 1) % nb]])

    # 两层都是 [0, 2π) 上的等分点，用整数交叉相乘比较角度，保证每个扇区的缝合方式完全一致
    na = inner.size
    triangles = []
    i = j = 0
    while i < na or j < nb:
        if j == nb or (i < na and (i + 1) * nb <= (j + 1) * na):
            triangles.append((inner[i % na], inner[(i + 1) % na], outer[j % nb]))
            i += 1
        else:
            triangles.append((inner[i % na], outer[(j + 1) % nb], outer[j % nb]))
            j += 1
    return np.asarray(triangles, dtype=np.int64)


class _RingBuilder:
    """
    逐层生成同心（或混合）曲线上的顶点，并把相邻层缝合成三角形条带。
    每一层以该层顶点下标组成的数组表示。
    """

    def __init__(self, h: float):
        self.h = h
        self._points: list[np.ndarray] = []
        self._triangles: list[np.ndarray] = []
        self._count = 0

    def _append(self, points: np.ndarray) -> np.ndarray:
        ids = np.arange(self._count, self._count + len(points), dtype=np.int64)
        self._points.append(points)
        self._count += len(points)
        return ids

    def add_center(self) -> np.ndarray:
        return self._append(np.zeros((1, 2)))

    def add_curve(self, curve: _Curve) -> np.ndarray:
        return self._append(curve.evaluate(_ring_angles(curve.speed_max, self.h)))

    def add_scaled(self, center: np.ndarray, curve: _Curve) -> np.ndarray:
        """从中心点向外，按 s·C(θ) 逐层铺到曲线 C 本身。"""
        n_levels = max(1, math.ceil(_SPACING_SAFETY * curve.radius_max / self.h))
        previous = center
        for i in range(1, n_levels + 1):
            s = i / n_levels
            theta = _ring_angles(s * curve.speed_max, self.h)
            level = self._append(s * curve.evaluate(theta))
            self._triangles.append(_stitch(previous, level))
            previous = level
        return previous

    def add_blend(self, start: np.ndarray, inner: _Curve, outer: _Curve) -> np.ndarray:
        """在两条曲线之间按 (1-s)·C_in + s·C_out 插值铺层，start 是已存在的内层。"""
        sample = 2.0 * math.pi * np.arange(_GAP_SAMPLES) / _GAP_SAMPLES
        gap = float(np.max(np.linalg.norm(outer.evaluate(sample) - inner.evaluate(sample), axis=1)))
        n_levels = max(1, math.ceil(_SPACING_SAFETY * gap / self.h))
        previous = start
        for k in range(1, n_levels + 1):
            s = k / n_levels
            theta = _ring_angles((1.0 - s) * inner.speed_max + s * outer.speed_max, self.h)
            level = self._append((1.0 - s) * inner.evaluate(theta) + s * outer.evaluate(theta))
            self._triangles.append(_stitch(previous, level))
            previous = level
        return previous

    def finish(self, interface_loops: tuple[np.ndarray, ...] = ()) -> RawMesh:
        vertices = np.vstack(self._points)
        triangles = np.vstack(self._triangles)
        return RawMesh(vertices, orient_positive(vertices, triangles), interface_loops)


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def orient_positive(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """把负向三角形的后两个顶点交换，使所有三角形正向。"""
    triangles = np.array(triangles, dtype=np.int64, copy=True)
    negative = signed_areas(vertices, triangles) < 0
    triangles[negative, 1], triangles[negative, 2] = (
        triangles[negative, 2].copy(),
        triangles[negative, 1].copy(),
    )
    return triangles


class DomainFamily(abc.ABC):
    """
    形状族的抽象基类。

    每个形状族负责生成初始网格、把细化后的新边界点投影回解析边界，
    并提供解析的面积与周长作为网格收敛性的参照。
    """

    def __init__(self, spec: DomainSpec):
        self.spec = spec

    @abc.abstractmethod
    def build(self) -> RawMesh:
        """生成名义边长为 spec.target_h 的初始网格。"""
        raise NotImplementedError

    @abc.abstractmethod
    def project_boundary(self, points: np.ndarray) -> np.ndarray:
        """把靠近边界的点投影到解析边界上。"""
        raise NotImplementedError

    @abc.abstractmethod
    def area(self) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def perimeter(self) -> float:
        """全部边界分量的总长度。"""
        raise NotImplementedError

    def project_interface(self, points: np.ndarray) -> np.ndarray:
        rho = self.spec.interface_radius
        if rho is None:
            raise MeshError("区域没有内部界面，无法投影")
        r = np.hypot(points[:, 0], points[:, 1])
        return points * (rho / r)[:, None]


class StarShapedFamily(DomainFamily):
    """关于原点星形的光滑区域：圆盘、椭圆、径向扰动圆盘。"""

    @abc.abstractmethod
    def outer_curve(self) -> _Curve:
        raise NotImplementedError

    @abc.abstractmethod
    def polar_radius(self, phi: np.ndarray) -> np.ndarray:
        """边界在极角 φ 方向上到原点的距离。"""
        raise NotImplementedError

    def build(self) -> RawMesh:
        builder = _RingBuilder(self.spec.target_h)
        center = builder.add_center()
        outer = self.outer_curve()
        rho = self.spec.interface_radius
        if rho is None:
            builder.add_scaled(center, outer)
            return builder.finish()

        interface_curve = _circle(rho)
        interface = builder.add_scaled(center, interface_curve)
        builder.add_blend(interface, interface_curve, outer)
        return builder.finish((interface,))

    def project_boundary(self, points: np.ndarray) -> np.ndarray:
        phi = np.arctan2(points[:, 1], points[:, 0])
        return _polar(phi, self.polar_radius(phi))


class DiskFamily(StarShapedFamily):
    def outer_curve(self) -> _Curve:
        return _circle(self.spec.radius)

    def polar_radius(self, phi):
        return np.full_like(phi, self.spec.radius)

    def area(self) -> float:
        return math.pi * self.spec.radius**2

    def perimeter(self) -> float:
        return 2.0 * math.pi * self.spec.radius


class EllipseFamily(StarShapedFamily):
    def outer_curve(self) -> _Curve:
        a, b = self.spec.a, self.spec.b
        return _Curve(
            lambda th: np.column_stack([a * np.cos(th), b * np.sin(th)]), max(a, b), max(a, b)
        )

    def polar_radius(self, phi):
        a, b = self.spec.a, self.spec.b
        return a * b / np.hypot(b * np.cos(phi), a * np.sin(phi))

    def area(self) -> float:
        return math.pi * self.spec.a * self.spec.b

    def perimeter(self) -> float:
        major, minor = max(self.spec.a, self.spec.b), min(self.spec.a, self.spec.b)
        return 4.0 * major * float(special.ellipe(1.0 - (minor / major) ** 2))


class RadialFamily(StarShapedFamily):
    """r(θ) = 1 + ε·cos(mθ)；ε = 0 时与单位圆盘逐点相同。"""

    def _r(self, theta):
        return 1.0 + self.spec.epsilon * np.cos(self.spec.mode * theta)

    def outer_curve(self) -> _Curve:
        eps, m = abs(self.spec.epsilon), self.spec.mode
        return _Curve(
            lambda th: _polar(th, self._r(th)), math.hypot(1.0 + eps, eps * m), 1.0 + eps
        )

    def polar_radius(self, phi):
        return self._r(phi)

    def area(self) -> float:
        return math.pi * (1.0 + 0.5 * self.spec.epsilon**2)

    def perimeter(self) -> float:
        eps, m = self.spec.epsilon, self.spec.mode

        def speed(theta):
            return math.hypot(1.0 + eps * math.cos(m * theta), eps * m * math.sin(m * theta))

        value, _ = integrate.quad(speed, 0.0, 2.0 * math.pi, limit=200)
        return value


class AnnulusFamily(DomainFamily):
    def build(self) -> RawMesh:
        builder = _RingBuilder(self.spec.target_h)
        inner = _circle(self.spec.inner_radius)
        outer = _circle(self.spec.radius)
        hole = builder.add_curve(inner)
        rho = self.spec.interface_radius
        if rho is None:
            builder.add_blend(hole, inner, outer)
            return builder.finish()

        middle = _circle(rho)
        interface = builder.add_blend(hole, inner, middle)
        builder.add_blend(interface, middle, outer)
        return builder.finish((interface,))

    def project_boundary(self, points: np.ndarray) -> np.ndarray:
        r = np.hypot(points[:, 0], points[:, 1])
        r_in, r_out = self.spec.inner_radius, self.spec.radius
        target = np.where(np.abs(r - r_out) < np.abs(r - r_in), r_out, r_in)
        return points * (target / r)[:, None]

    def area(self) -> float:
        return math.pi * (self.spec.radius**2 - self.spec.inner_radius**2)

    def perimeter(self) -> float:
        return 2.0 * math.pi * (self.spec.radius + self.spec.inner_radius)


class PolygonFamily(DomainFamily):
    """多边形：边界等距撒点 + 内部三角格点，再做 Delaunay 剖分并剔除外部三角形。"""

    def __init__(self, spec: DomainSpec):
        super().__init__(spec)
        polygon = shapely.Polygon(spec.vertices)
        if not polygon.is_valid or polygon.area <= 0:
            raise ParameterError("多边形顶点必须构成简单闭合多边形")
        self._polygon = shapely.geometry.polygon.orient(polygon, sign=1.0)

    def build(self) -> RawMesh:
        spacing = self.spec.target_h / _SPACING_SAFETY
        corners = np.asarray(self._polygon.exterior.coords)[:-1]

        boundary = []
        for start, end in zip(corners, np.roll(corners, -1, axis=0), strict=True):
            n = max(1, math.ceil(np.linalg.norm(end - start) / spacing))
            s = np.arange(n)[:, None] / n
            boundary.append(start + s * (end - start))
        boundary_points = np.vstack(boundary)

        xmin, ymin, xmax, ymax = self._polygon.bounds
        dy = spacing * math.sqrt(3.0) / 2.0
        rows = []
        for j, y in enumerate(np.arange(ymin + dy / 2.0, ymax, dy)):
            x = np.arange(xmin + (spacing / 2.0 if j % 2 else 0.0), xmax, spacing)
            rows.append(np.column_stack([x, np.full_like(x, y)]))
        lattice = np.vstack(rows) if rows else np.empty((0, 2))
        inside = shapely.contains_xy(self._polygon, lattice[:, 0], lattice[:, 1])
        lattice = lattice[inside]
        distance = shapely.distance(self._polygon.exterior, shapely.points(lattice))
        lattice = lattice[distance > 0.45 * spacing]

        points = np.vstack([boundary_points, lattice])
        triangles = Delaunay(points).simplices.astype(np.int64)
        centroids = points[triangles].mean(axis=1)
        keep = shapely.contains_xy(self._polygon, centroids[:, 0], centroids[:, 1])
        triangles = orient_positive(points, triangles[keep])
        areas = signed_areas(points, triangles)
        triangles = triangles[areas > 1e-12 * areas.mean()]

        used, triangles = np.unique(triangles, return_inverse=True)
        points, triangles = points[used], triangles.reshape(-1, 3)

        logger.debug(
            "多边形 Delaunay 剖分完成",
            vertices=len(points),
            triangles=len(triangles),
            boundary=len(boundary_points),
        )
        return RawMesh(points, triangles)

    def project_boundary(self, points: np.ndarray) -> np.ndarray:
        # 边的中点本来就落在多边形边上
        return points

    def area(self) -> float:
        return float(self._polygon.area)

    def perimeter(self) -> float:
        return float(self._polygon.length)


_FAMILIES: dict[Family, type[DomainFamily]] = {
    Family.DISK: DiskFamily,
    Family.ELLIPSE: EllipseFamily,
    Family.ANNULUS: AnnulusFamily,
    Family.RADIAL: RadialFamily,
    Family.POLYGON: PolygonFamily,
}


def family_for(spec: DomainSpec) -> DomainFamily:
    return _FAMILIES[spec.family](spec)
