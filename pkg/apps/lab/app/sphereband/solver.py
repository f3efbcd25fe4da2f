from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import structlog
from numpy.polynomial import legendre
from scipy import sparse

from app.errors import ParameterError
from app.spectral.basis import EigenBasis, build_basis
from app.spectral.eigensolvers import ShiftInvertEigenSolver, solve_pencil
from app.sphereband.geometry import BandSpec

logger = structlog.get_logger(__name__)

_GAUSS_POINTS, _GAUSS_WEIGHTS = legendre.leggauss(3)


@dataclass(frozen=True, eq=False)
class BandSystem:
    """
    轴对称 Laplace–Beltrami 算子 -(sin θ)⁻¹ d/dθ(sin θ d/dθ) 的一维 P1 离散。

    stiffness 与 mass 都带权 sin θ，是全网格矩阵；dof_map 为自由节点
    （纬带去掉两端，极冠只去掉 θ₀ 端，极点处取自然边界条件）。
    """

    spec: BandSpec
    grid: np.ndarray
    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    dof_map: np.ndarray

    @property
    def end_nodes(self) -> tuple[int, ...]:
        """边界圆对应的网格节点，与 spec.circles 一一对应。"""
        last = len(self.grid) - 1
        return (last,) if self.spec.is_cap else (0, last)

    def restricted(self) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
        idx = self.dof_map
        return (
            self.stiffness[idx][:, idx].tocsr(),
            self.mass[idx][:, idx].tocsr(),
        )


def assemble_band(spec: BandSpec) -> BandSystem:
    """以每单元 3 点 Gauss 积分组装带权刚度与质量矩阵。"""
    theta = spec.grid()
    a, b = theta[:-1], theta[1:]
    h = b - a
    # 参考单元 [0, 1] 上的 Gauss 点
    xi = 0.5 * (_GAUSS_POINTS + 1.0)
    w = 0.5 * _GAUSS_WEIGHTS
    weight = np.sin(a[:, None] + h[:, None] * xi[None, :]) * w[None, :] * h[:, None]
    shape = np.stack([1.0 - xi, xi])

    # local[e, i, j]
    k_local = weight.sum(axis=1)[:, None, None] / h[:, None, None] ** 2 * np.array(
        [[1.0, -1.0], [-1.0, 1.0]]
    )
    m_local = np.einsum("eq,iq,jq->eij", weight, shape, shape)

    n = len(theta)
    cells = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    rows = np.repeat(cells, 2, axis=1).ravel()
    cols = np.tile(cells, (1, 2)).ravel()
    K = sparse.coo_matrix((k_local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sparse.coo_matrix((m_local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    dof_map = np.arange(0 if spec.is_cap else 1, n - 1)
    return BandSystem(spec=spec, grid=theta, stiffness=K, mass=M, dof_map=dof_map)


@dataclass(frozen=True, eq=False, kw_only=True)
class BandEigenBasis(EigenBasis):
    """轴对称扇区的特征基；modes 是 θ 网格上的节点值，在权 sin θ 下正交归一。"""

    band: BandSystem
    grid: np.ndarray = field(repr=False)


def band_eigenbasis(spec: BandSpec, count: int) -> BandEigenBasis:
    """
    轴对称 Dirichlet 特征问题的前 count 个特征对。

    参数:
        spec: 纬带或极冠。
        count: 特征对个数，至少为 1。

    返回:
        BandEigenBasis: α_k = ∫ φ_k sin θ dθ，面积为 ∫ sin θ dθ。
    """
    system = assemble_band(spec)
    if not 1 <= count < len(system.dof_map):
        raise ParameterError(f"特征对个数必须在 [1, {len(system.dof_map) - 1}] 内，实际为 {count}")
    K_ii, M_ii = system.restricted()
    lambdas, vectors, residuals = solve_pencil(K_ii, M_ii, count, ShiftInvertEigenSolver())
    modes = np.zeros((len(system.grid), count))
    modes[system.dof_map] = vectors
    reduced_area = spec.area / (2.0 * np.pi)
    basis = build_basis(
        lambdas,
        modes,
        system.mass,
        residuals,
        li_yau_constant=1.0 / reduced_area,
        basis_cls=BandEigenBasis,
        band=system,
        grid=system.grid,
    )
    logger.info(
        "球面纬带特征基计算完成",
        band=spec.parameters(),
        count=count,
        lambda_1=float(lambdas[0]),
    )
    return basis
