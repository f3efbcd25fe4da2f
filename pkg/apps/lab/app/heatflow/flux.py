from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import structlog

from app.errors import ParameterError
from app.fem.assembly import SystemMatrices
from app.fem.poisson import discrete_harmonic_extension
from app.heatflow.state import DEFAULT_TOLERANCE, HeatState, heat_solution
from app.spectral.basis import EigenBasis, eigenspace_projection

logger = structlog.get_logger(__name__)

# 节点场在边界上允许的最大残留迹
TRACE_TOL = 1e-12
# ‖Φ‖_M 低于 √|Ω| 的该倍数时，特征空间投影视为零
NULL_MASS = 1e-6


@dataclass(frozen=True, eq=False)
class FluxProfile:
    """
    边界通量密度 q（按 sys.boundary_dofs 排列）及其统计量。

    mean 是曲面平均 q̄ = 1ᵀBq / 1ᵀB1，deviation 是相对 L²(∂Ω) 偏差；
    is_null 时场本身可忽略，deviation 记为 NaN。total 为 1ᵀBq。
    """

    t: float | None
    q: np.ndarray
    mean: float
    deviation: float
    total: float
    is_null: bool = False
    K_used: int | None = None
    truncated: bool = False


def _check_trace(sys: SystemMatrices, field: np.ndarray) -> None:
    trace = float(np.abs(sys.boundary_values(field)).max())
    if trace > TRACE_TOL * max(1.0, float(np.abs(field).max())):
        raise ParameterError(f"节点场的边界迹 {trace:.3e} 不为零，不能作为 Dirichlet 场配对")


def conormal_residual(sys: SystemMatrices, field: np.ndarray, laplacian_field: np.ndarray):
    """K·field + M·laplacian_field；其边界行就是对边界帽函数的一致通量泛函 g。"""
    return sys.K @ field + sys.M @ laplacian_field


def conormal_pairing(
    sys: SystemMatrices,
    field: np.ndarray,
    laplacian_field: np.ndarray,
    psi: np.ndarray,
    extension: np.ndarray | None = None,
) -> float:
    """
    弱余法向导数配对 ⟨∂_ν field, ψ⟩ = ψ̃ᵀ(M·Δfield) + ψ̃ᵀ(K·field)。

    参数:
        sys: 系统矩阵。
        field: 边界迹为零的节点场。
        laplacian_field: field 的（分布意义下）Laplace 节点场。
        psi: 按 sys.boundary_dofs 排列的边界测试函数。
        extension: 可选的 ψ 的节点延拓；缺省使用离散调和延拓。

    返回:
        float: 配对值。
    """
    _check_trace(sys, field)
    if extension is None:
        extension = discrete_harmonic_extension(sys, psi)
    elif not np.allclose(sys.boundary_values(extension), psi, rtol=0.0, atol=1e-14):
        raise ParameterError("给定的延拓在边界上与 ψ 不一致")
    return float(extension @ conormal_residual(sys, field, laplacian_field))


def flux_profile(
    sys: SystemMatrices,
    field: np.ndarray,
    laplacian_field: np.ndarray,
    t: float | None = None,
    null_mass: float | None = None,
) -> FluxProfile:
    """
    由一致通量泛函恢复边界通量密度：B_bb q = g，g 为 K·field + M·Δfield 的边界行。

    参数:
        null_mass: 场的 M-范数；给出且低于 1e-6·√|Ω| 时标记为零场。
    """
    _check_trace(sys, field)
    g = sys.boundary_values(conormal_residual(sys, field, laplacian_field))
    q = sys.boundary_mass_solver.solve(g)

    Bq = sys.B_bb @ q
    perimeter = float(sys.B_bb.sum())
    total = float(Bq.sum())
    mean = total / perimeter
    energy = float(q @ Bq)

    is_null = null_mass is not None and null_mass < NULL_MASS * math.sqrt(sys.area)
    if is_null or energy <= 0:
        deviation = math.nan
    else:
        centered = q - mean
        deviation = math.sqrt(max(float(centered @ (sys.B_bb @ centered)), 0.0) / energy)
    return FluxProfile(t=t, q=q, mean=mean, deviation=deviation, total=total, is_null=is_null)


def boundary_flux(sys: SystemMatrices, state: HeatState) -> FluxProfile:
    """热解 u(t) 的边界通量 ∂_ν u(t)。"""
    profile = flux_profile(sys, state.u, state.du_dt, t=state.t)
    balance = float(np.sum(sys.M @ state.du_dt))
    if balance != 0.0:
        mismatch = abs(profile.total - balance) / abs(balance)
        if mismatch > 1e-8:
            logger.warning("通量平衡偏差超过 1e-8", t=state.t, mismatch=mismatch)
    return replace(profile, K_used=state.K_used, truncated=state.truncated)


def _projection_laplacian(basis: EigenBasis, group_index: int) -> np.ndarray:
    members = basis.groups[group_index]
    return -(basis.modes[:, members] @ (basis.lambdas[members] * basis.alphas[members]))


def eigenspace_flux(sys: SystemMatrices, basis: EigenBasis, group_index: int) -> FluxProfile:
    """
    特征空间投影 Φ_k 的边界通量，Δ Φ_k = -Σ_{j∈组} λ_j α_j φ_j。

    角向特征空间上 α_j ≈ 0，Φ_k 可忽略，此时返回的剖面 is_null 为 True。
    """
    projection = eigenspace_projection(basis, group_index)
    laplacian = _projection_laplacian(basis, group_index)
    return flux_profile(sys, projection.Phi, laplacian, null_mass=projection.mass)


def mode_pairings(
    sys: SystemMatrices, basis: EigenBasis, psi: np.ndarray, groups: Sequence[int]
) -> np.ndarray:
    """γ_k = ⟨∂_ν Φ_k, ψ⟩，k 取 groups 中的各特征空间。"""
    extension = discrete_harmonic_extension(sys, psi)
    out = np.empty(len(groups))
    for i, g in enumerate(groups):
        projection = eigenspace_projection(basis, g)
        laplacian = _projection_laplacian(basis, g)
        out[i] = conormal_pairing(sys, projection.Phi, laplacian, psi, extension)
    return out


def flux_functional(
    sys: SystemMatrices,
    basis: EigenBasis,
    psi: np.ndarray,
    times: Sequence[float],
    tol: float = DEFAULT_TOLERANCE,
) -> np.ndarray:
    """F_ψ(t) = ⟨∂_ν u(t), ψ⟩ 在给定时间网格上的取值。"""
    extension = discrete_harmonic_extension(sys, psi)
    values = []
    for t in times:
        state = heat_solution(basis, t, tol)
        values.append(conormal_pairing(sys, state.u, state.du_dt, psi, extension))
    return np.asarray(values)


def time_integrated_flux(sys: SystemMatrices, basis: EigenBasis, K: int) -> FluxProfile:
    """
    ∫₀^∞ ∂_ν u dt 的逐模态计算：Σ_{k≤K} (α_k/λ_k) ∂_ν φ_k。

    对应的场是谱扭转函数 v = Σ α_k λ_k⁻¹ φ_k，其 Laplace 场为 -Σ α_k φ_k。
    """
    if not 1 <= K <= basis.count:
        raise ParameterError(f"模态数必须在 [1, {basis.count}] 内，实际为 {K}")
    alphas, lambdas = basis.alphas[:K], basis.lambdas[:K]
    v = basis.modes[:, :K] @ (alphas / lambdas)
    laplacian = -(basis.modes[:, :K] @ alphas)
    return flux_profile(sys, v, laplacian)
