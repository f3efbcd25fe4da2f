from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from app.errors import ParameterError
from app.fem.linear import select_solver
from app.heatflow.overdetermination import Verdict
from app.heatflow.state import DEFAULT_TOLERANCE, heat_solution
from app.sphereband.geometry import MIN_POINTS, BandSpec
from app.sphereband.solver import BandEigenBasis, BandSystem, band_eigenbasis

logger = structlog.get_logger(__name__)

# 半分辨率差值的放大倍数与相对下限
_NOISE_FACTOR = 10.0
_NOISE_FLOOR = 1e-9


def _end_fluxes(system: BandSystem, field: np.ndarray, laplacian: np.ndarray) -> np.ndarray:
    """一维一致通量：端点行上的 K·field + M·Δfield 除以 sin θ_b 即为外法向导数。"""
    g = system.stiffness @ field + system.mass @ laplacian
    ends = list(system.end_nodes)
    return g[ends] / np.sin(system.grid[ends])


def band_flux(
    basis: BandEigenBasis, spec: BandSpec, t: float, tol: float = DEFAULT_TOLERANCE
) -> tuple[float, float]:
    """
    t 时刻两条边界圆上的外法向通量 (q1, q2)，q1 在 θ₁ 处、q2 在 θ₂ 处。

    极冠只有一条边界圆，返回 (q, nan)。由轴对称性，每条圆上的通量自动为常数。
    """
    if basis.band.spec != spec:
        raise ParameterError("特征基与给定的纬带参数不一致")
    if not t > 0:
        raise ParameterError(f"时间必须为正，实际为 {t}")
    state = heat_solution(basis, t, tol)
    q = _end_fluxes(basis.band, state.u, state.du_dt)
    if spec.is_cap:
        return float(q[0]), math.nan
    return float(q[0]), float(q[1])


def _flow_functional(
    basis: BandEigenBasis, spec: BandSpec, t: float
) -> tuple[float, float, float]:
    """零均值测试函数 ψ = 1/|C₁| − 1/|C₂| 下的 F_ψ(t) = q1 − q2；极冠恒为零。"""
    q1, q2 = band_flux(basis, spec, t)
    if spec.is_cap:
        return q1, q2, 0.0
    return q1, q2, q1 - q2


@dataclass(frozen=True, eq=False)
class ConstantFlowReport:
    spec: BandSpec
    times: tuple[float, ...]
    q1: np.ndarray
    q2: np.ndarray
    F: np.ndarray
    noise: np.ndarray
    verdict: Verdict

    @property
    def relative_gaps(self) -> np.ndarray:
        """|q1 − q2| / max(|q1|, |q2|)。"""
        scale = np.maximum(np.abs(self.q1), np.abs(self.q2))
        return np.abs(self.F) / np.where(scale > 0, scale, 1.0)


def constant_flow_report(
    spec: BandSpec,
    times: Sequence[float],
    count: int = 200,
    basis: BandEigenBasis | None = None,
) -> ConstantFlowReport:
    """
    在时间网格上计算 F_ψ(t) 并与网格噪声比较。

    传入 basis 时直接复用，不再重新求解细网格上的特征问题。

    噪声由半分辨率网格上的重算标定：10·|F(n) − F(n/2)| + 10⁻⁹·max|q|；
    所有时刻 |F| 都低于噪声时判为常通量（PASS）。
    """
    times = [float(t) for t in times]
    if not times:
        raise ParameterError("时间序列不能为空")
    coarse_spec = BandSpec(spec.theta1, spec.theta2, max(spec.n_points // 2, MIN_POINTS))

    if basis is None:
        fine = band_eigenbasis(spec, min(count, spec.n_points - 3))
    elif basis.band.spec != spec:
        raise ParameterError("特征基与给定的纬带参数不一致")
    else:
        fine = basis
    coarse = band_eigenbasis(coarse_spec, min(count, coarse_spec.n_points - 3))
    rows = [_flow_functional(fine, spec, t) for t in times]
    coarse_F = np.array([_flow_functional(coarse, coarse_spec, t)[2] for t in times])

    q1 = np.array([r[0] for r in rows])
    q2 = np.array([r[1] for r in rows])
    F = np.array([r[2] for r in rows])
    q_max = np.nanmax(np.abs(np.concatenate([q1, q2])))
    noise = _NOISE_FACTOR * np.abs(F - coarse_F) + _NOISE_FLOOR * q_max

    verdict = Verdict.PASS if np.all(np.abs(F) <= noise) else Verdict.FAIL
    logger.info(
        "常通量性质检查完成",
        band=spec.parameters(),
        symmetric=spec.symmetric_flag,
        max_abs_F=float(np.abs(F).max()),
        verdict=verdict.value,
    )
    if verdict is Verdict.FAIL and not spec.symmetric_flag and not spec.is_cap:
        logger.info("非对称纬带两条边界圆上的通量不相等")
    return ConstantFlowReport(
        spec=spec, times=tuple(times), q1=q1, q2=q2, F=F, noise=noise, verdict=verdict
    )


@dataclass(frozen=True, eq=False)
class BandTorsion:
    direct: np.ndarray
    spectral: np.ndarray
    discrepancy: float
    fluxes: np.ndarray


def band_torsion(spec: BandSpec, basis: BandEigenBasis) -> BandTorsion:
    """
    v = Σ α_k λ_k⁻¹ φ_k 与直接求解 -Δ_g v = 1 的比较，以及 v 在各边界圆上的通量。

    只作为实验报告，不参与判定。
    """
    if basis.band.spec != spec:
        raise ParameterError("特征基与给定的纬带参数不一致")
    system = basis.band
    K_ii, _ = system.restricted()
    ones = np.ones(len(system.grid))
    rhs = (system.mass @ ones)[system.dof_map]
    direct = np.zeros(len(system.grid))
    direct[system.dof_map] = select_solver(K_ii).solve(rhs)

    spectral = basis.modes @ (basis.alphas / basis.lambdas)
    diff = direct - spectral
    norm = math.sqrt(float(direct @ (system.mass @ direct)))
    discrepancy = math.sqrt(float(diff @ (system.mass @ diff))) / norm
    fluxes = _end_fluxes(system, direct, -ones)
    logger.info(
        "纬带扭转函数",
        band=spec.parameters(),
        discrepancy=discrepancy,
        fluxes=[float(q) for q in fluxes],
    )
    return BandTorsion(direct=direct, spectral=spectral, discrepancy=discrepancy, fluxes=fluxes)
