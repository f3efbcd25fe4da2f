from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import structlog

from app.errors import ParameterError
from app.fem.assembly import SystemMatrices
from app.spectral.basis import EigenBasis
from app.spectral.truncation import truncation_index

logger = structlog.get_logger(__name__)

# 谱表示允许的最小时间；更短的时间交给热含量路径
MIN_SPECTRAL_TIME = 1e-4
DEFAULT_TOLERANCE = 1e-8
# 抛物极值原理的离散松弛
_MAX_PRINCIPLE_SLACK = 1e-2


@dataclass(frozen=True, eq=False)
class HeatState:
    """t 时刻的谱热解 u(t) 与 ∂ₜu = Δu，K_used 为实际使用的模态数。"""

    t: float
    u: np.ndarray
    du_dt: np.ndarray
    K_used: int
    truncated: bool = False


def _check_time(t: float) -> float:
    t = float(t)
    if not t > 0:
        raise ParameterError(f"时间必须为正，实际为 {t}")
    if t < MIN_SPECTRAL_TIME:
        raise ParameterError(
            f"时间 {t:g} 低于谱表示下限 {MIN_SPECTRAL_TIME:g}，短时行为请用热含量拟合"
        )
    return t


def heat_solution_fixed(basis: EigenBasis, t: float, K: int) -> HeatState:
    """固定模态数 K 的热解，用于半群性、级数一致性等固定截断下的恒等式。"""
    t = _check_time(t)
    if not 1 <= K <= basis.count:
        raise ParameterError(f"模态数必须在 [1, {basis.count}] 内，实际为 {K}")
    weights = basis.alphas[:K] * np.exp(-basis.lambdas[:K] * t)
    modes = basis.modes[:, :K]
    return HeatState(
        t=t,
        u=modes @ weights,
        du_dt=-(modes @ (basis.lambdas[:K] * weights)),
        K_used=K,
    )


def heat_solution(basis: EigenBasis, t: float, tol: float = DEFAULT_TOLERANCE) -> HeatState:
    """
    初值为 1 的 Dirichlet 热流的截断特征展开。

    参数:
        basis: 特征基。
        t: 时间，t ≥ 1e-4。
        tol: 截断尾项容差。

    返回:
        HeatState: u = Σ_{k≤K} α_k e^{-λ_k t} φ_k 与 du_dt = -Σ λ_k α_k e^{-λ_k t} φ_k，
        K 由 truncation_index 决定；容差达不到时 truncated 为 True。
    """
    t = _check_time(t)
    truncation = truncation_index(basis, t, tol)
    state = replace(
        heat_solution_fixed(basis, t, truncation.index), truncated=truncation.limited
    )

    if state.u.min() < -_MAX_PRINCIPLE_SLACK or state.u.max() > 1.0 + _MAX_PRINCIPLE_SLACK:
        logger.warning(
            "热解超出 [0, 1] 的离散松弛范围",
            t=t,
            K=state.K_used,
            u_min=float(state.u.min()),
            u_max=float(state.u.max()),
        )
    return state


def propagate(
    sys: SystemMatrices, basis: EigenBasis, field: np.ndarray, t: float, K: int
) -> np.ndarray:
    """把节点场投影到前 K 个模态上，再按热半群推进时间 t。"""
    coeffs = basis.modes[:, :K].T @ (sys.M @ field)
    return basis.modes[:, :K] @ (coeffs * np.exp(-basis.lambdas[:K] * t))
