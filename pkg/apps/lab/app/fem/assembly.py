from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import shapely
import structlog
from scipy import sparse

from app.errors import AssemblyError, MeshError
from app.fileio import atomic_write_text
from app.fem.linear import LinearSolver, select_solver
from app.geometry.mesh import Mesh

logger = structlog.get_logger(__name__)

# 面积低于平均面积的该倍数即视为退化三角形
DEGENERATE_AREA = 1e-14

_MASS_REFERENCE = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_MASS_REFERENCE = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


def _element_matrices(vertices: np.ndarray, triangles: np.ndarray):
    """P1 单元刚度与质量矩阵的闭式表达，返回 (areas, K_e, M_e)，后两者形状为 (nt, 3, 3)。"""
    p = vertices[triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    mean = float(np.mean(np.abs(areas)))
    degenerate = np.flatnonzero(areas < DEGENERATE_AREA * mean)
    if degenerate.size:
        bad = int(degenerate[0])
        raise AssemblyError(
            f"三角形 {bad} 退化（面积 {areas[bad]:.3e}，平均面积 {mean:.3e}）", triangle=bad
        )

    # 重心坐标 λ_i 的梯度：对边 p_{i+2} - p_{i+1} 逆时针旋转 90° 再除以 2A
    opposite = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
    grads = np.stack([-opposite[..., 1], opposite[..., 0]], axis=-1) / (2.0 * areas)[:, None, None]
    stiffness = areas[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    mass = areas[:, None, None] * _MASS_REFERENCE
    return areas, stiffness, mass


def _scatter(local: np.ndarray, cells: np.ndarray, n: int) -> sparse.csr_matrix:
    k = cells.shape[1]
    rows = np.repeat(cells, k, axis=1).ravel()
    cols = np.tile(cells, (1, k)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _edge_mass(vertices: np.ndarray, edges: np.ndarray, n: int) -> sparse.csr_matrix:
    lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    return _scatter(lengths[:, None, None] * _EDGE_MASS_REFERENCE, edges, n)


def _loop_edges(loop: np.ndarray) -> np.ndarray:
    return np.column_stack([loop, np.roll(loop, -1)])


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """
    全网格上的刚度 K、质量 M 与边界质量 B，以及 Dirichlet 限制所需的下标映射。

    boundary_dofs 是升序的边界顶点下标，所有"边界场"都按此顺序排列；
    dof_map[i] 是第 i 个内部自由度对应的顶点下标。
    """

    mesh: Mesh
    K: sparse.csr_matrix
    M: sparse.csr_matrix
    B: sparse.csr_matrix
    boundary_dofs: np.ndarray
    dof_map: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_interior(self) -> int:
        return len(self.dof_map)

    @cached_property
    def K_ii(self) -> sparse.csr_matrix:
        return self.K[self.dof_map][:, self.dof_map].tocsr()

    @cached_property
    def M_ii(self) -> sparse.csr_matrix:
        return self.M[self.dof_map][:, self.dof_map].tocsr()

    @cached_property
    def K_ib(self) -> sparse.csr_matrix:
        return self.K[self.dof_map][:, self.boundary_dofs].tocsr()

    @cached_property
    def B_bb(self) -> sparse.csr_matrix:
        """边界质量矩阵在边界自由度上的限制。"""
        return self.B[self.boundary_dofs][:, self.boundary_dofs].tocsc()

    @cached_property
    def solver(self) -> LinearSolver:
        """K_ii 的求解器，首次使用时分解并缓存。"""
        return select_solver(self.K_ii)

    @cached_property
    def boundary_mass_solver(self) -> LinearSolver:
        """B_bb 的求解器，用于由一致通量泛函恢复边界通量密度。"""
        return select_solver(self.B_bb)

    @cached_property
    def area(self) -> float:
        return float(self.M.sum())

    @cached_property
    def perimeter(self) -> float:
        return float(self.B.sum())

    def restrict(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field)[self.dof_map]

    def prolong(self, interior_values: np.ndarray) -> np.ndarray:
        """内部自由度上的值延拓为全网格节点场，边界取零。"""
        interior_values = np.asarray(interior_values)
        out = np.zeros((self.n_vertices, *interior_values.shape[1:]))
        out[self.dof_map] = interior_values
        return out

    def boundary_values(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field)[self.boundary_dofs]

    def m_norm(self, field: np.ndarray) -> float:
        return float(np.sqrt(max(field @ (self.M @ field), 0.0)))


def assemble(mesh: Mesh) -> SystemMatrices:
    """
    组装 P1 有限元的刚度、质量和边界质量矩阵。

    逐单元闭式积分后一次性 scatter-add；结果矩阵构造后不再修改。

    参数:
        mesh (Mesh): 协调三角网格。

    返回:
        SystemMatrices: K、M、B 以及边界/内部自由度映射。
    """
    nv = mesh.n_vertices
    _, stiffness, mass = _element_matrices(mesh.vertices, mesh.triangles)
    K = _scatter(stiffness, mesh.triangles, nv)
    M = _scatter(mass, mesh.triangles, nv)
    boundary_edges = np.vstack([_loop_edges(loop) for loop in mesh.boundary_loops])
    B = _edge_mass(mesh.vertices, boundary_edges, nv)

    boundary_dofs = np.array(mesh.boundary_vertices, copy=True)
    dof_map = np.flatnonzero(mesh.interior_mask)
    if dof_map.size == 0:
        raise AssemblyError("网格没有内部顶点，Dirichlet 问题没有自由度")
    for array in (boundary_dofs, dof_map):
        array.setflags(write=False)

    logger.debug("有限元矩阵组装完成", vertices=nv, interior=dof_map.size, nnz=K.nnz)
    return SystemMatrices(mesh, K, M, B, boundary_dofs, dof_map)


@dataclass(frozen=True, eq=False)
class InterfaceMatrices:
    """
    内部界面 Γ 所围一侧（ω 侧）的刚度/质量矩阵，以及 Γ 上的边质量矩阵。

    所有矩阵都是全网格尺寸 (nv, nv)，只在 ω 侧三角形或 Γ 的边上有非零元。
    bounds_subdomain 为 False 表示 Γ 内侧含有区域的边界（例如圆环的内孔），
    此时 Γ 并不围出 Ω 的子区域。
    """

    loop: np.ndarray
    K_omega: sparse.csr_matrix
    M_omega: sparse.csr_matrix
    B_gamma: sparse.csr_matrix
    omega_triangles: np.ndarray
    bounds_subdomain: bool

    @cached_property
    def B_gamma_loop(self) -> sparse.csc_matrix:
        """Γ 边质量矩阵在界面顶点（按环顺序）上的限制。"""
        return self.B_gamma[self.loop][:, self.loop].tocsc()


def interface_matrices(mesh: Mesh, loop_index: int = 0) -> InterfaceMatrices:
    """
    按三角形重心是否落在界面多边形内划分 ω 侧，并在其上组装矩阵。

    参数:
        mesh: 带有内部界面的网格。
        loop_index: 界面环下标。

    返回:
        InterfaceMatrices: ω 侧矩阵与界面边质量矩阵。
    """
    if not 0 <= loop_index < len(mesh.interface_loops):
        raise MeshError(f"网格没有第 {loop_index} 个内部界面，请在 DomainSpec 中设置界面半径")
    loop = mesh.interface_loops[loop_index]
    polygon = shapely.Polygon(mesh.vertices[loop])

    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    inside = shapely.contains_xy(polygon, centroids[:, 0], centroids[:, 1])
    omega = mesh.triangles[inside]
    if omega.size == 0:
        raise MeshError("界面环内侧没有任何三角形")

    nv = mesh.n_vertices
    _, stiffness, mass = _element_matrices(mesh.vertices, omega)
    boundary_xy = mesh.vertices[mesh.boundary_vertices]
    encloses_boundary = bool(
        np.any(shapely.contains_xy(polygon, boundary_xy[:, 0], boundary_xy[:, 1]))
    )
    if encloses_boundary:
        logger.info("界面内侧包含区域边界，Γ 不围出子区域", loop_index=loop_index)

    return InterfaceMatrices(
        loop=loop,
        K_omega=_scatter(stiffness, omega, nv),
        M_omega=_scatter(mass, omega, nv),
        B_gamma=_edge_mass(mesh.vertices, _loop_edges(loop), nv),
        omega_triangles=np.flatnonzero(inside),
        bounds_subdomain=not encloses_boundary,
    )


def write_coordinate(matrix: sparse.spmatrix, path: str | os.PathLike) -> Path:
    """以坐标格式 (row col value) 导出稀疏矩阵，供调试比对。"""
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    lines.extend(
        f"{r} {c} {v:.17g}"
        for r, c, v in zip(
            coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist(), strict=True
        )
    )
    return atomic_write_text(path, "\n".join(lines) + "\n")
