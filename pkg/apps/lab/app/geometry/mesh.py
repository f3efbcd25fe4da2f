from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import structlog

from app.errors import MeshError
from app.geometry.domains import DomainSpec
from app.geometry.families import family_for, signed_areas

logger = structlog.get_logger(__name__)

# 允许的最长边与名义边长之比
MAX_EDGE_FACTOR = 1.5


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    协调三角网格。

    构造之后不可变（所有数组均为只读），可以在并发读者之间安全共享。
    boundary_normal 的形状为 (nv, 2)，内部顶点处为零向量。
    外边界环逆时针、孔洞边界环顺时针，区域始终位于有向边的左侧。
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple[np.ndarray, ...]
    boundary_normal: np.ndarray
    interior_mask: np.ndarray
    interface_loops: tuple[np.ndarray, ...] = ()
    spec: DomainSpec | None = field(default=None)

    @classmethod
    def from_triangles(
        cls,
        vertices: np.ndarray,
        triangles: np.ndarray,
        spec: DomainSpec | None = None,
        interface_loops: tuple[np.ndarray, ...] = (),
    ) -> Mesh:
        """
        由顶点与三角形构造网格，并从拓扑中提取边界环与外法向。

        参数:
            vertices: (nv, 2) 顶点坐标。
            triangles: (nt, 3) 顶点下标，必须全部正向。
            spec: 生成该网格的区域描述；细化时据此把新边界点投影回解析边界。
            interface_loops: 内部界面环（有序顶点下标）。

        返回:
            Mesh: 通过全部不变量校验的网格。
        """
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError(f"顶点数组形状必须为 (nv, 2)，实际为 {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise MeshError(f"三角形数组形状必须为 (nt, 3)，实际为 {triangles.shape}")
        nv = len(vertices)
        if triangles.min() < 0 or triangles.max() >= nv:
            raise MeshError("三角形引用了不存在的顶点")
        if np.unique(triangles).size != nv:
            raise MeshError("存在未被任何三角形引用的孤立顶点")

        areas = signed_areas(vertices, triangles)
        if np.any(areas <= 0):
            bad = int(np.flatnonzero(areas <= 0)[0])
            raise MeshError(f"三角形 {bad} 的有向面积非正 ({areas[bad]:.3e})")

        loops = _boundary_loops(vertices, triangles)
        interior = np.ones(nv, dtype=bool)
        for loop in loops:
            interior[loop] = False

        normals = np.zeros((nv, 2))
        for loop in loops:
            normals[loop] = _loop_normals(vertices[loop])

        for loop in interface_loops:
            if not np.all(interior[np.asarray(loop)]):
                raise MeshError("界面环必须完全由内部顶点组成")

        return cls(
            vertices=_frozen(vertices, float),
            triangles=_frozen(triangles, np.int64),
            boundary_loops=tuple(_frozen(loop, np.int64) for loop in loops),
            boundary_normal=_frozen(normals, float),
            interior_mask=_frozen(interior, bool),
            interface_loops=tuple(_frozen(loop, np.int64) for loop in interface_loops),
            spec=spec,
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """所有边界顶点下标（升序），即 FEM 中被 Dirichlet 条件消去的自由度。"""
        out = np.flatnonzero(~self.interior_mask)
        out.setflags(write=False)
        return out

    @cached_property
    def edges(self) -> np.ndarray:
        """无向边 (i, j)，i < j，按字典序排列。"""
        out = _unique_edges(self.triangles)
        out.setflags(write=False)
        return out

    @cached_property
    def areas(self) -> np.ndarray:
        out = signed_areas(self.vertices, self.triangles)
        out.setflags(write=False)
        return out

    @property
    def h(self) -> float:
        return max_edge_length(self)


def _unique_edges(triangles: np.ndarray) -> np.ndarray:
    pairs = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(pairs, axis=1), axis=0)


def _boundary_loops(vertices: np.ndarray, triangles: np.ndarray) -> list[np.ndarray]:
    """
    从有向边提取边界环：反向边不存在的有向边即为边界边。

    每个环从其最小顶点下标开始，按有向面积降序排列（外边界在前，孔洞在后）。
    """
    nv = len(vertices)
    directed = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    keys = directed[:, 0] * nv + directed[:, 1]
    unique_keys, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 1):
        raise MeshError("存在重复的有向边：网格方向不一致或不是流形")

    reverse = directed[:, 1] * nv + directed[:, 0]
    on_boundary = ~np.isin(reverse, unique_keys)
    boundary = directed[on_boundary]
    if len(boundary) == 0:
        raise MeshError("网格没有边界边")

    successor: dict[int, int] = {}
    for a, b in boundary.tolist():
        if a in successor:
            raise MeshError(f"边界顶点 {a} 关联多条出边，边界环不是简单闭曲线")
        successor[a] = b

    loops = []
    remaining = set(successor)
    while remaining:
        start = min(remaining)
        loop = [start]
        current = successor[start]
        while current != start:
            if current not in remaining or current in loop:
                raise MeshError(f"边界在顶点 {current} 处不闭合")
            loop.append(current)
            current = successor[current]
        remaining.difference_update(loop)
        loops.append(np.asarray(loop, dtype=np.int64))

    def loop_area(loop: np.ndarray) -> float:
        p = vertices[loop]
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    return sorted(loops, key=loop_area, reverse=True)


def _loop_normals(points: np.ndarray) -> np.ndarray:
    """相邻两条边的外法向取平均后单位化；区域位于有向边左侧，外法向为 (e_y, -e_x)。"""
    edges = np.roll(points, -1, axis=0) - points
    edge_normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    edge_normals /= np.linalg.norm(edge_normals, axis=1)[:, None]
    vertex_normals = edge_normals + np.roll(edge_normals, 1, axis=0)
    return vertex_normals / np.linalg.norm(vertex_normals, axis=1)[:, None]


def make_domain(spec: DomainSpec) -> Mesh:
    """
    按区域描述生成初始网格。

    光滑形状族的边界顶点直接取自解析曲线；多边形使用 Delaunay 剖分。
    最长边超过 MAX_EDGE_FACTOR·target_h 时抛出 MeshError。
    """
    log = logger.bind(family=spec.family.value, target_h=spec.target_h)
    family = family_for(spec)
    raw = family.build()
    mesh = Mesh.from_triangles(raw.vertices, raw.triangles, spec, raw.interface_loops)

    h_max = max_edge_length(mesh)
    if h_max > MAX_EDGE_FACTOR * spec.target_h:
        raise MeshError(
            f"最长边 {h_max:.4g} 超过名义边长 {spec.target_h:g} 的 {MAX_EDGE_FACTOR:g} 倍"
        )
    log.info(
        "网格生成完成",
        vertices=mesh.n_vertices,
        triangles=mesh.n_triangles,
        loops=len(mesh.boundary_loops),
        max_edge=h_max,
        area_error=abs(mesh_area(mesh) - family.area()) / family.area(),
    )
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """
    一致加密：每个三角形以边中点分成 4 个。

    若网格带有区域描述，新的边界中点投影回解析边界，新的界面中点投影回界面圆。
    """
    nv = mesh.n_vertices
    edges = mesh.edges
    edge_keys = edges[:, 0] * nv + edges[:, 1]

    def midpoint_ids(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        keys = np.minimum(a, b) * nv + np.maximum(a, b)
        return nv + np.searchsorted(edge_keys, keys)

    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    family = family_for(mesh.spec) if mesh.spec is not None else None

    for loop in mesh.boundary_loops:
        ids = midpoint_ids(loop, np.roll(loop, -1)) - nv
        if family is not None:
            midpoints[ids] = family.project_boundary(midpoints[ids])

    interface_loops = []
    for loop in mesh.interface_loops:
        mids = midpoint_ids(loop, np.roll(loop, -1))
        if family is not None:
            midpoints[mids - nv] = family.project_interface(midpoints[mids - nv])
        interface_loops.append(np.column_stack([loop, mids]).ravel())

    a, b, c = mesh.triangles.T
    ab, bc, ca = midpoint_ids(a, b), midpoint_ids(b, c), midpoint_ids(c, a)
    triangles = np.vstack(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ]
    )
    vertices = np.vstack([mesh.vertices, midpoints])
    refined = Mesh.from_triangles(vertices, triangles, mesh.spec, tuple(interface_loops))
    logger.debug("网格加密完成", vertices=refined.n_vertices, triangles=refined.n_triangles)
    return refined


def mesh_area(mesh: Mesh) -> float:
    return float(np.sum(mesh.areas))


def boundary_length(mesh: Mesh, loop_index: int | None = None) -> float:
    """指定边界环（缺省为全部边界环）的折线长度。"""
    loops = mesh.boundary_loops if loop_index is None else (mesh.boundary_loops[loop_index],)
    total = 0.0
    for loop in loops:
        p = mesh.vertices[loop]
        total += float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))
    return total


def max_edge_length(mesh: Mesh) -> float:
    e = mesh.edges
    return float(np.max(np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)))
