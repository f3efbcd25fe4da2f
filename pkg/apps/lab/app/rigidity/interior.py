from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import structlog

from app.errors import MeshError, ParameterError
from app.fem.assembly import InterfaceMatrices, SystemMatrices, interface_matrices
from app.fem.linear import LinearSolver, select_solver
from app.heatflow.flux import FluxProfile
from app.heatflow.overdetermination import DEFAULT_THRESHOLD, Verdict
from app.heatflow.state import DEFAULT_TOLERANCE, heat_solution
from app.spectral.basis import EigenBasis

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class InteriorReport:
    """
    内部界面 Γ = ∂ω 上的两个条件：u(τₙ) 在 Γ 上为常数，∂_ν u(tₙ) 在 Γ 上为常数。

    bounds_subdomain 为 False 时（圆环反例）两个条件同时成立也不蕴含刚性。
    """

    taus: tuple[float, ...]
    trace_means: np.ndarray
    trace_variations: np.ndarray
    flux_profiles: tuple[FluxProfile, ...]
    threshold: float
    bounds_subdomain: bool
    verdict: Verdict

    @property
    def flux_deviations(self) -> np.ndarray:
        return np.array([p.deviation for p in self.flux_profiles])

    @property
    def trace_passed(self) -> bool:
        return bool(np.all(self.trace_variations <= self.threshold))

    @property
    def flux_passed(self) -> bool:
        return bool(np.all(self.flux_deviations <= self.threshold))

    @property
    def implies_rigidity(self) -> bool:
        return self.verdict is Verdict.PASS and self.bounds_subdomain


def _relative_variation(values: np.ndarray, B: np.ndarray) -> tuple[float, float]:
    weights = B @ np.ones(len(values))
    mean = float(weights @ values) / float(weights.sum())
    energy = float(values @ (B @ values))
    if energy <= 0:
        return mean, math.nan
    centered = values - mean
    return mean, math.sqrt(max(float(centered @ (B @ centered)), 0.0) / energy)


def interface_flux(
    iface: InterfaceMatrices, solver: LinearSolver, u: np.ndarray, du_dt: np.ndarray, t: float
) -> FluxProfile:
    """ω 侧一致通量：界面行上的 K_ω u + M_ω ∂ₜu，再由 B_Γ 恢复密度。"""
    g = (iface.K_omega @ u + iface.M_omega @ du_dt)[iface.loop]
    q = solver.solve(g)
    B = iface.B_gamma_loop
    mean, deviation = _relative_variation(q, B)
    total = float(np.sum(B @ q))
    return FluxProfile(t=t, q=q, mean=mean, deviation=deviation, total=total)


def interior_surface_check(
    sys: SystemMatrices,
    basis: EigenBasis,
    times: Sequence[float],
    taus: Sequence[float],
    threshold: float = DEFAULT_THRESHOLD,
    loop_index: int = 0,
    tol: float = DEFAULT_TOLERANCE,
) -> InteriorReport:
    """
    检查网格内部界面上的迹条件与通量条件。

    参数:
        sys: 带内部界面的网格的系统矩阵。
        basis: 特征基。
        times: 通量条件的时间 tₙ。
        taus: 迹条件的时间 τₙ。
        threshold: 两项相对偏差的判定阈值。
        loop_index: 界面环下标。

    返回:
        InteriorReport: 每个 τ 的迹相对变差、每个 t 的 ω 侧通量剖面与判定。
    """
    times = [float(t) for t in times]
    taus = [float(t) for t in taus]
    if not times or not taus:
        raise ParameterError("时间序列 times 与 taus 都不能为空")

    mesh = sys.mesh
    iface = interface_matrices(mesh, loop_index)
    if np.any(~mesh.interior_mask[iface.loop]):
        raise MeshError("界面 ∂ω 与区域边界相交，ω 的闭包必须严格位于 Ω 内部")
    log = logger.bind(loop_index=loop_index, bounds_subdomain=iface.bounds_subdomain)

    B = iface.B_gamma_loop
    truncated = False
    trace_means, trace_variations = [], []
    for tau in taus:
        state = heat_solution(basis, tau, tol)
        truncated |= state.truncated
        mean, variation = _relative_variation(state.u[iface.loop], B)
        trace_means.append(mean)
        trace_variations.append(variation)

    solver = select_solver(B)
    profiles = []
    for t in times:
        state = heat_solution(basis, t, tol)
        truncated |= state.truncated
        profile = interface_flux(iface, solver, state.u, state.du_dt, t)
        profiles.append(replace(profile, K_used=state.K_used, truncated=state.truncated))

    worst = max(max(trace_variations), max(p.deviation for p in profiles))
    if truncated:
        verdict = Verdict.INCONCLUSIVE
    elif worst <= threshold:
        verdict = Verdict.PASS
    else:
        verdict = Verdict.FAIL
    if verdict is Verdict.PASS and not iface.bounds_subdomain:
        log.warning("界面条件成立，但 Γ 不围出子区域，不能推出区域是球")
    log.info("内部界面检查完成", worst=worst, verdict=verdict.value)

    return InteriorReport(
        taus=tuple(taus),
        trace_means=np.asarray(trace_means),
        trace_variations=np.asarray(trace_variations),
        flux_profiles=tuple(profiles),
        threshold=threshold,
        bounds_subdomain=iface.bounds_subdomain,
        verdict=verdict,
    )
