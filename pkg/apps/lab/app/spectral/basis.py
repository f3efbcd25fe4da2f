from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import structlog

from app.errors import ParameterError, SolverError
from app.fem.assembly import SystemMatrices
from app.geometry.mesh import Mesh
from app.spectral.eigensolvers import EigenSolver, solve_pencil

logger = structlog.get_logger(__name__)

# 相对间隙低于该值的相邻特征值归入同一特征空间
GROUP_GAP = 1e-6
# |α| 低于 sqrt(area) 的该倍数时视为零均值模态，改用最大分量定号
_ZERO_ALPHA = 1e-10
_BESSEL_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """
    前 count 个 Dirichlet 特征对。

    modes 是 (n_nodes, count) 的全节点场，边界节点为零；各列 M-正交归一。
    groups 是按相对间隙聚类得到的特征空间划分，每组是模态下标数组。
    """

    lambdas: np.ndarray
    modes: np.ndarray
    alphas: np.ndarray
    groups: tuple[np.ndarray, ...]
    residuals: np.ndarray
    area: float
    li_yau_constant: float
    mesh: Mesh | None = None

    @property
    def count(self) -> int:
        return len(self.lambdas)

    @cached_property
    def sup_norms(self) -> np.ndarray:
        """各模态节点值的最大模，作为 ‖φ_k‖_∞ 的替代。"""
        out = np.abs(self.modes).max(axis=0)
        out.setflags(write=False)
        return out

    def group_of(self, k: int) -> int:
        for g, members in enumerate(self.groups):
            if k in members:
                return g
        raise ParameterError(f"模态下标 {k} 越界")


@dataclass(frozen=True, eq=False)
class EigenspaceProjection:
    """常函数 1 在第 group_index 个特征空间上的正交投影 Φ_k = Σ_{j∈组} α_j φ_j。"""

    group_index: int
    eigenvalue: float
    Phi: np.ndarray
    mass: float


def group_eigenvalues(lambdas: np.ndarray, gap: float = GROUP_GAP) -> tuple[np.ndarray, ...]:
    """相邻特征值相对差不超过 gap 时并入同一组。"""
    groups = []
    current = [0]
    for k in range(1, len(lambdas)):
        if lambdas[k] - lambdas[k - 1] <= gap * abs(lambdas[k]):
            current.append(k)
        else:
            groups.append(np.asarray(current))
            current = [k]
    groups.append(np.asarray(current))
    return tuple(groups)


def normalize_signs(modes: np.ndarray, alphas: np.ndarray, area: float) -> None:
    """就地定号：α_k > 0；零均值模态则令绝对值最大的分量为正。"""
    threshold = _ZERO_ALPHA * math.sqrt(area)
    for k in range(modes.shape[1]):
        if abs(alphas[k]) > threshold:
            flip = alphas[k] < 0
        else:
            flip = modes[np.argmax(np.abs(modes[:, k])), k] < 0
        if flip:
            modes[:, k] *= -1.0
            alphas[k] *= -1.0


def check_li_yau(lambdas: np.ndarray, constant: float) -> bool:
    """λ_k ≥ C·k 的合理性检查，不满足只记警告。"""
    k = np.arange(1, len(lambdas) + 1)
    violated = np.flatnonzero(lambdas < constant * k)
    if violated.size:
        logger.warning(
            "特征值低于 Li–Yau 型下界 C·k",
            constant=constant,
            first_index=int(violated[0]) + 1,
            eigenvalue=float(lambdas[violated[0]]),
        )
        return False
    return True


def build_basis(
    lambdas: np.ndarray,
    modes: np.ndarray,
    M,
    residuals: np.ndarray,
    li_yau_constant: float | None = None,
    mesh: Mesh | None = None,
    basis_cls: type[EigenBasis] = EigenBasis,
    **extra,
) -> EigenBasis:
    """由全节点模态组装 EigenBasis：计算 α、定号、分组并做 Bessel 与 Li–Yau 检查。"""
    modes = np.array(modes, dtype=float, copy=True)
    ones = np.ones(modes.shape[0])
    area = float(ones @ (M @ ones))
    alphas = (M @ ones) @ modes
    normalize_signs(modes, alphas, area)

    bessel = float(np.sum(alphas**2))
    if bessel > area * (1.0 + _BESSEL_SLACK):
        raise SolverError(f"Bessel 不等式不成立：Σα² = {bessel:.12g} > 面积 {area:.12g}")

    constant = li_yau_constant if li_yau_constant is not None else 2.0 * math.pi / area
    check_li_yau(lambdas, constant)

    for array in (lambdas, modes, alphas, residuals):
        array.setflags(write=False)
    return basis_cls(
        lambdas=lambdas,
        modes=modes,
        alphas=alphas,
        groups=group_eigenvalues(lambdas),
        residuals=residuals,
        area=area,
        li_yau_constant=constant,
        mesh=mesh,
        **extra,
    )


def eigenbasis(
    sys: SystemMatrices,
    count: int,
    solver: EigenSolver | None = None,
    li_yau_constant: float | None = None,
) -> EigenBasis:
    """
    计算受限广义特征问题 K_ii φ = λ M_ii φ 的前 count 个特征对。

    参数:
        sys: 系统矩阵。
        count: 特征对个数，1 ≤ count ≤ 内部自由度数。
        solver: 特征求解器；缺省按规模自动选择。
        li_yau_constant: 下界常数 C，缺省为 2π/|Ω|。

    返回:
        EigenBasis: M-正交归一、已定号、已分组的特征基。
    """
    if count < 1 or count > sys.n_interior:
        raise ParameterError(f"特征对个数必须在 [1, {sys.n_interior}] 内，实际为 {count}")
    lambdas, vectors, residuals = solve_pencil(sys.K_ii, sys.M_ii, count, solver)
    basis = build_basis(
        lambdas, sys.prolong(vectors), sys.M, residuals, li_yau_constant, mesh=sys.mesh
    )
    logger.info(
        "特征基计算完成",
        count=count,
        lambda_1=float(lambdas[0]),
        groups=len(basis.groups),
        bessel_fraction=float(np.sum(basis.alphas**2)) / basis.area,
    )
    return basis


def coefficients(basis: EigenBasis) -> np.ndarray:
    """α_k = 1ᵀ M φ_k（构造时已计算并通过 Bessel 检查）。"""
    return basis.alphas


def eigenspace_projection(basis: EigenBasis, group_index: int) -> EigenspaceProjection:
    if not 0 <= group_index < len(basis.groups):
        raise ParameterError(f"特征空间下标 {group_index} 越界（共 {len(basis.groups)} 组）")
    members = basis.groups[group_index]
    Phi = basis.modes[:, members] @ basis.alphas[members]
    mass = float(np.sqrt(np.sum(basis.alphas[members] ** 2)))
    return EigenspaceProjection(
        group_index=group_index,
        eigenvalue=float(np.mean(basis.lambdas[members])),
        Phi=Phi,
        mass=mass,
    )


def reconstruct_constant(basis: EigenBasis, K: int) -> float:
    """
    前 K 项 Σ α_k φ_k 与常函数 1 的 L²(Ω) 误差。

    由 M-正交归一性，误差平方等于 |Ω| − Σ_{k≤K} α_k²。
    """
    if not 1 <= K <= basis.count:
        raise ParameterError(f"项数必须在 [1, {basis.count}] 内，实际为 {K}")
    return math.sqrt(max(basis.area - float(np.sum(basis.alphas[:K] ** 2)), 0.0))
