from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from app.errors import ParameterError
from app.fem.assembly import SystemMatrices
from app.heatflow.flux import boundary_flux, eigenspace_flux, flux_functional, mode_pairings
from app.heatflow.overdetermination import DEFAULT_THRESHOLD, DiskNoise
from app.heatflow.state import DEFAULT_TOLERANCE, heat_solution
from app.spectral.basis import EigenBasis

logger = structlog.get_logger(__name__)

ANNIHILATION_TIMES = (0.1, 0.5, 1.0)
DEFAULT_GROUPS = 6


@dataclass(frozen=True, eq=False)
class PairingReport:
    """
    零均值测试函数与某组边界通量的配对值。

    values 形状为 (测试函数数, 列数)，列是时间（热流通量）或特征空间（Φ_k 的通量）。
    """

    values: np.ndarray
    columns: tuple[float, ...]
    threshold: float

    @property
    def max_abs(self) -> np.ndarray:
        """每一列上的最大绝对配对值。"""
        return np.abs(self.values).max(axis=0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.max_abs <= self.threshold))


def _check_tests(sys: SystemMatrices, tests: np.ndarray) -> np.ndarray:
    tests = np.atleast_2d(np.asarray(tests, dtype=float))
    if tests.shape[1] != len(sys.boundary_dofs):
        raise ParameterError(
            f"测试函数长度 {tests.shape[1]} 与边界自由度数 {len(sys.boundary_dofs)} 不一致"
        )
    means = tests @ (sys.B_bb @ np.ones(tests.shape[1]))
    if np.any(np.abs(means) > 1e-10 * sys.perimeter * np.abs(tests).max()):
        raise ParameterError("测试函数的边界积分不为零")
    return tests


def zero_average_annihilation(
    sys: SystemMatrices,
    basis: EigenBasis,
    tests: np.ndarray,
    threshold: float,
    times: Sequence[float] = ANNIHILATION_TIMES,
    tol: float = DEFAULT_TOLERANCE,
) -> PairingReport:
    """
    F_ψ(t) = ⟨∂_ν u(t), ψ⟩ 对零均值 ψ 的取值；通量为常数当且仅当它们全部为零。

    参数:
        tests: (n, n_boundary) 的零均值边界测试函数。
        threshold: 判定阈值，通常取圆盘标定的配对噪声。
    """
    tests = _check_tests(sys, tests)
    values = np.array([flux_functional(sys, basis, psi, times, tol) for psi in tests])
    report = PairingReport(
        values=values, columns=tuple(float(t) for t in times), threshold=threshold
    )
    logger.info(
        "零均值测试函数湮灭检查",
        tests=len(tests),
        max_abs=float(report.max_abs.max()),
        passed=report.passed,
    )
    return report


def mode_mechanism(
    sys: SystemMatrices,
    basis: EigenBasis,
    tests: np.ndarray,
    threshold: float,
    n_groups: int = DEFAULT_GROUPS,
) -> PairingReport:
    """
    逐特征空间的机制：γ_k = ⟨∂_ν Φ_k, ψ⟩。

    球上每个 Φ_k 都有常数通量，γ_k 对所有零均值 ψ 为零；非球区域至少有一个 k 使 γ_k ≠ 0。
    """
    tests = _check_tests(sys, tests)
    groups = list(range(min(n_groups, len(basis.groups))))
    values = np.array([mode_pairings(sys, basis, psi, groups) for psi in tests])
    report = PairingReport(
        values=values, columns=tuple(float(g) for g in groups), threshold=threshold
    )
    logger.info(
        "特征空间通量机制检查",
        groups=len(groups),
        max_abs=[float(v) for v in report.max_abs],
        passed=report.passed,
    )
    return report


def relative_noise(
    sys: SystemMatrices,
    basis: EigenBasis,
    threshold: float = DEFAULT_THRESHOLD,
    times: Sequence[float] = ANNIHILATION_TIMES,
    n_groups: int = DEFAULT_GROUPS,
    tol: float = DEFAULT_TOLERANCE,
) -> DiskNoise:
    """
    由固定的相对偏差阈值换算出配对阈值，不依赖当前网格上测得的噪声。

    ψ 零均值且 ‖ψ‖² = |∂Ω| 时 |⟨q, ψ⟩| ≤ deviation·‖q‖·√|∂Ω|，因此
    通量偏差不超过 threshold 时配对值不超过 threshold·‖q‖·√|∂Ω|。
    """
    if not threshold > 0:
        raise ParameterError(f"阈值必须为正，实际为 {threshold}")
    root = math.sqrt(sys.perimeter)

    def norm(q: np.ndarray) -> float:
        return math.sqrt(max(float(q @ (sys.B_bb @ q)), 0.0))

    pairing = max(norm(boundary_flux(sys, heat_solution(basis, t, tol)).q) for t in times)
    groups = range(min(n_groups, len(basis.groups)))
    mode = max(norm(eigenspace_flux(sys, basis, g).q) for g in groups)
    return DiskNoise(
        deviation=threshold,
        pairing=threshold * pairing * root,
        mode_pairing=threshold * mode * root,
        safety=1.0,
    )
