from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from app.errors import ParameterError
from app.fem.assembly import SystemMatrices, assemble
from app.geometry.domains import DomainSpec
from app.geometry.mesh import make_domain, refine
from app.heatflow.flux import FluxProfile, boundary_flux, flux_functional, mode_pairings
from app.heatflow.state import DEFAULT_TOLERANCE, heat_solution
from app.spectral.basis import EigenBasis, eigenbasis

logger = structlog.get_logger(__name__)

DEFAULT_THRESHOLD = 0.02
DEFAULT_TIMES = tuple(0.05 * 2.0**n for n in range(6))
# 与时间 1/λ₁ 比较的短时/长时分界
_SHORT_FACTOR = 0.1
_LONG_FACTOR = 1.0


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


class TimeRegime(str, enum.Enum):
    """时间序列相对扩散时间尺度 1/λ₁ 的位置。"""

    SHORT = "short"
    LONG = "long"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True, eq=False)
class OverdeterminationReport:
    profiles: tuple[FluxProfile, ...]
    threshold: float
    regime: TimeRegime
    max_deviation: float
    verdict: Verdict

    @property
    def times(self) -> list[float]:
        return [p.t for p in self.profiles]

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.profiles])

    @property
    def truncated(self) -> bool:
        return any(p.truncated for p in self.profiles)


def classify_times(times: Sequence[float], lambda_1: float) -> TimeRegime:
    scale = 1.0 / lambda_1
    if all(t < _SHORT_FACTOR * scale for t in times):
        return TimeRegime.SHORT
    if all(t > _LONG_FACTOR * scale for t in times):
        return TimeRegime.LONG
    return TimeRegime.INTERMEDIATE


def summarize_profiles(
    profiles: Sequence[FluxProfile], lambda_1: float, threshold: float
) -> OverdeterminationReport:
    """把各时刻的通量剖面汇总为判定报告；任一时刻截断受限则判为 INCONCLUSIVE。"""
    max_deviation = max(p.deviation for p in profiles)
    if any(p.truncated for p in profiles):
        verdict = Verdict.INCONCLUSIVE
    elif max_deviation <= threshold:
        verdict = Verdict.PASS
    else:
        verdict = Verdict.FAIL
    return OverdeterminationReport(
        profiles=tuple(profiles),
        threshold=threshold,
        regime=classify_times([p.t for p in profiles], lambda_1),
        max_deviation=max_deviation,
        verdict=verdict,
    )


def _validate_times(times: Sequence[float]) -> list[float]:
    times = [float(t) for t in times]
    if not times:
        raise ParameterError("时间序列不能为空")
    if any(not t > 0 for t in times):
        raise ParameterError("时间序列中的所有时间必须为正")
    return times


def check_discrete_overdetermination(
    sys: SystemMatrices,
    basis: EigenBasis,
    times: Sequence[float],
    threshold: float = DEFAULT_THRESHOLD,
    tol: float = DEFAULT_TOLERANCE,
) -> OverdeterminationReport:
    """
    离散时间序列上的常通量条件检查。

    参数:
        sys: 系统矩阵。
        basis: 特征基。
        times: 非空、全为正的时间序列。
        threshold: 最大相对偏差的判定阈值（通常取圆盘标定噪声的倍数）。
        tol: 谱截断容差。

    返回:
        OverdeterminationReport: 每个时刻的通量剖面、时间区间类型与判定。
    """
    times = _validate_times(times)
    profiles = [boundary_flux(sys, heat_solution(basis, t, tol)) for t in times]
    report = summarize_profiles(profiles, float(basis.lambdas[0]), threshold)
    logger.info(
        "常通量检查完成",
        times=len(times),
        max_deviation=report.max_deviation,
        regime=report.regime.value,
        verdict=report.verdict.value,
    )
    return report


def zero_average_test_functions(
    sys: SystemMatrices, count: int, seed: int, max_order: int = 4
) -> np.ndarray:
    """
    生成 count 个 ∫_∂Ω ψ = 0 的光滑随机边界测试函数。

    ψ 是极角的三角多项式（阶数不超过 max_order，系数按 1/m² 衰减），
    去掉 B-加权平均后归一化为 ψᵀBψ = |∂Ω|。

    返回:
        np.ndarray: 形状 (count, n_boundary)，列按 sys.boundary_dofs 排列。
    """
    if count < 1:
        raise ParameterError(f"测试函数个数必须为正，实际为 {count}")
    rng = np.random.default_rng(seed)
    xy = sys.mesh.vertices[sys.boundary_dofs]
    angle = np.arctan2(xy[:, 1], xy[:, 0])
    orders = np.arange(1, max_order + 1)
    weights = sys.B_bb @ np.ones(len(angle))
    perimeter = float(weights.sum())

    out = np.empty((count, len(angle)))
    for i in range(count):
        a, b = rng.standard_normal((2, max_order)) / orders**2
        psi = np.cos(np.outer(angle, orders)) @ a + np.sin(np.outer(angle, orders)) @ b
        psi -= float(weights @ psi) / perimeter
        psi *= math.sqrt(perimeter / float(psi @ (sys.B_bb @ psi)))
        out[i] = psi
    return out


@dataclass(frozen=True)
class DiskNoise:
    """
    同分辨率单位圆盘上测得的离散噪声。

    deviation 为常通量偏差的最大值；pairing 为零均值测试函数与 ∂_ν u(t) 配对的最大绝对值；
    mode_pairing 为前若干特征空间 γ_k 的最大绝对值。阈值是噪声乘以安全系数。
    """

    deviation: float
    pairing: float
    mode_pairing: float
    safety: float

    @property
    def deviation_threshold(self) -> float:
        return self.safety * self.deviation

    @property
    def pairing_threshold(self) -> float:
        return self.safety * self.pairing

    @property
    def mode_threshold(self) -> float:
        return self.safety * self.mode_pairing


def measure_noise(
    sys: SystemMatrices,
    basis: EigenBasis,
    times: Sequence[float],
    tests: np.ndarray,
    n_groups: int,
    tol: float = DEFAULT_TOLERANCE,
) -> tuple[float, float, float]:
    """在给定区域上测量 (最大通量偏差, 最大 |F_ψ(t)|, 最大 |γ_k|)。"""
    deviation = max(boundary_flux(sys, heat_solution(basis, t, tol)).deviation for t in times)
    pairing = max(
        float(np.abs(flux_functional(sys, basis, psi, times, tol)).max()) for psi in tests
    )
    groups = range(min(n_groups, len(basis.groups)))
    mode = max(float(np.abs(mode_pairings(sys, basis, psi, groups)).max()) for psi in tests)
    return deviation, pairing, mode


def calibrate_disk_noise(
    target_h: float,
    refinements: int = 0,
    times: Sequence[float] = DEFAULT_TIMES,
    count: int = 40,
    seed: int = 0,
    n_tests: int = 10,
    n_groups: int = 6,
    safety: float = 2.0,
) -> DiskNoise:
    """
    在相同名义边长（及加密次数）的单位圆盘上测量离散噪声，作为默认判定阈值的基准。

    圆盘的通量在连续层面严格为常数，这里测到的偏差全部来自离散化。
    """
    times = _validate_times(times)
    mesh = make_domain(DomainSpec.disk(1.0, target_h))
    for _ in range(refinements):
        mesh = refine(mesh)
    sys = assemble(mesh)
    basis = eigenbasis(sys, min(count, sys.n_interior))
    tests = zero_average_test_functions(sys, n_tests, seed)
    deviation, pairing, mode = measure_noise(sys, basis, times, tests, n_groups)
    noise = DiskNoise(deviation=deviation, pairing=pairing, mode_pairing=mode, safety=safety)
    logger.info(
        "圆盘噪声标定完成",
        target_h=target_h,
        refinements=refinements,
        deviation=deviation,
        pairing=pairing,
        mode_pairing=mode,
    )
    return noise
