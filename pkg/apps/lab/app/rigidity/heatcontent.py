from __future__ import annotations

import abc
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import structlog
from scipy import linalg

from app.errors import FitError, ParameterError
from app.fem.assembly import SystemMatrices, assemble
from app.fem.linear import select_solver
from app.fem.poisson import discrete_harmonic_extension, harmonic_residual
from app.geometry.curvature import boundary_curvature
from app.geometry.domains import Family
from app.geometry.mesh import Mesh, refine
from app.spectral.basis import EigenBasis, eigenbasis
from app.spectral.truncation import truncation_index

logger = structlog.get_logger(__name__)

HARMONIC_TOL = 1e-8
# 短时热含量的截断容差为 |Ω| 的该倍数
MODAL_TOL_FACTOR = 1e-10
DEFAULT_WINDOW = (0.02, 0.2)
DEFAULT_SAMPLES = 12
DEFAULT_DEGREE = 3
MIN_SAMPLES = 6
# c0、c1、c2 相对几何目标的容差
FIT_TOLERANCES = (0.005, 0.02, 0.10)
# 缩放后 Vandermonde 矩阵条件数的上限
_MAX_CONDITION = 1e10
_WIDEN_FACTOR = 1.25

# ψ 由坐标 (n, 2) 给出节点值；None 表示 ψ ≡ 1
PsiFunction = Callable[[np.ndarray], np.ndarray]


class HeatContentValue(NamedTuple):
    value: float
    truncated: bool


class HeatContentEvaluator(abc.ABC):
    """f(t) = ∫_Ω u(t²) ψ 的求值器抽象基类。"""

    name: str = "abstract"

    @abc.abstractmethod
    def evaluate(self, psi: np.ndarray, t: float) -> HeatContentValue:
        """
        计算 ψᵀ M u(t²)。

        参数:
            psi: 离散调和的全节点场。
            t: 平方根时间变量，t > 0。

        返回:
            HeatContentValue: 数值以及是否受截断限制。
        """
        raise NotImplementedError


class ModalHeatContent(HeatContentEvaluator):
    """截断特征展开：Σ_{k≤K} α_k e^{-λ_k t²} (ψᵀ M φ_k)。"""

    name = "modal"

    def __init__(self, sys: SystemMatrices, basis: EigenBasis):
        self.sys = sys
        self.basis = basis
        self.tol = MODAL_TOL_FACTOR * sys.area

    def truncated_at(self, t: float) -> bool:
        return truncation_index(self.basis, t * t, self.tol).limited

    def evaluate(self, psi, t):
        truncation = truncation_index(self.basis, t * t, self.tol)
        K = truncation.index
        projections = self.basis.modes[:, :K].T @ (self.sys.M @ psi)
        weights = self.basis.alphas[:K] * np.exp(-self.basis.lambdas[:K] * t * t)
        return HeatContentValue(float(weights @ projections), truncation.limited)


class LanczosHeatContent(HeatContentEvaluator):
    """
    全离散展开的 Gauss–Lanczos 求积：ψᵀ M exp(-s M⁻¹K) P1，s = t²。

    在 M_ii 内积下对 A = M_ii⁻¹ K_ii 做带完全重正交化的 Lanczos，
    对所有离散模态求和，不受模态截断限制；ψ ≠ 1 时用极化恒等式。
    """

    name = "lanczos"

    def __init__(self, sys: SystemMatrices, steps: int = 120):
        self.sys = sys
        self.steps = min(steps, sys.n_interior)
        self._mass_solver = select_solver(sys.M_ii)
        ones = np.ones(sys.n_vertices)
        # 初值 1 在离散 H¹₀ 上的 L² 投影
        self._initial = self._mass_solver.solve(sys.restrict(sys.M @ ones))
        self._cache: dict[bytes, tuple[float, np.ndarray, np.ndarray]] = {}

    def _inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ (self.sys.M_ii @ b))

    def _tridiagonal(self, start: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """返回 (‖start‖²_M, Ritz 值, 首分量的平方)。"""
        key = start.tobytes()
        if key in self._cache:
            return self._cache[key]

        norm2 = self._inner(start, start)
        if norm2 == 0.0:
            result = (0.0, np.zeros(1), np.zeros(1))
            self._cache[key] = result
            return result

        basis = [start / math.sqrt(norm2)]
        alphas: list[float] = []
        betas: list[float] = []
        for j in range(self.steps):
            w = self._mass_solver.solve(self.sys.K_ii @ basis[j])
            alpha = self._inner(w, basis[j])
            alphas.append(alpha)
            for v in basis:
                w -= self._inner(w, v) * v
            beta = math.sqrt(max(self._inner(w, w), 0.0))
            if j == self.steps - 1 or beta <= 1e-12 * abs(alpha):
                break
            betas.append(beta)
            basis.append(w / beta)

        ritz, vectors = linalg.eigh_tridiagonal(np.array(alphas), np.array(betas))
        result = (norm2, ritz, vectors[0] ** 2)
        self._cache[key] = result
        return result

    def _quadratic_form(self, vector: np.ndarray, s: float) -> float:
        norm2, ritz, weights = self._tridiagonal(vector)
        return norm2 * float(weights @ np.exp(-s * ritz))

    def evaluate(self, psi, t):
        s = t * t
        z = self._mass_solver.solve(self.sys.restrict(self.sys.M @ psi))
        w = self._initial
        value = 0.25 * (self._quadratic_form(z + w, s) - self._quadratic_form(z - w, s))
        return HeatContentValue(value, False)


def check_harmonic(sys: SystemMatrices, psi: np.ndarray) -> None:
    residual = harmonic_residual(sys, psi)
    if residual > HARMONIC_TOL:
        raise ParameterError(
            f"ψ 不是离散调和函数（残差 {residual:.3e}），请先用 discrete_harmonic_extension 构造"
        )


def heat_content(sys: SystemMatrices, basis: EigenBasis, psi: np.ndarray, t: float) -> float:
    """
    f(t) = ψᵀ M u(t²)，u 为截断谱热解，截断容差 1e-10·|Ω|。

    ψ 必须是离散调和的；截断受限时记录警告。
    """
    if not t > 0:
        raise ParameterError(f"时间必须为正，实际为 {t}")
    psi = np.asarray(psi, dtype=float)
    check_harmonic(sys, psi)
    result = ModalHeatContent(sys, basis).evaluate(psi, t)
    if result.truncated:
        logger.warning("热含量的谱截断未达到容差", t=t, count=basis.count)
    return result.value


def harmonic_test_function(sys: SystemMatrices, psi_fn: PsiFunction | None) -> np.ndarray:
    """由边界上的取值构造离散调和 ψ；psi_fn 为 None 时取 ψ ≡ 1。"""
    if psi_fn is None:
        return np.ones(sys.n_vertices)
    boundary_xy = sys.mesh.vertices[sys.boundary_dofs]
    return discrete_harmonic_extension(sys, np.asarray(psi_fn(boundary_xy), dtype=float))


def heat_content_targets(sys: SystemMatrices, psi: np.ndarray) -> tuple[float, float, float]:
    """
    短时展开系数的几何目标值 (∫_Ω ψ, -(2/√π)∫_∂Ω ψ, ½∫_∂Ω Hψ)。

    二维时 H 即边界曲线的有向曲率。
    """
    mesh = sys.mesh
    psi_b = sys.boundary_values(psi)
    kappa = np.zeros(mesh.n_vertices)
    for index, loop in enumerate(mesh.boundary_loops):
        kappa[loop] = boundary_curvature(mesh, index)
    kappa_b = sys.boundary_values(kappa)
    weights = sys.B_bb @ np.ones(len(psi_b))
    c0 = float(np.ones(sys.n_vertices) @ (sys.M @ psi))
    c1 = -2.0 / math.sqrt(math.pi) * float(weights @ psi_b)
    c2 = 0.5 * float(weights @ (kappa_b * psi_b))
    return c0, c1, c2


@dataclass(frozen=True, eq=False)
class HeatContentFit:
    """
    f(t) ≈ Σ c_j t^j 的最小二乘拟合（t 为平方根时间）。

    coefficients 含全部拟合系数，c0/c1/c2 之外的高阶项只用于吸收 o(t²) 余项。
    relative_errors 对目标为零的系数给出绝对误差。
    """

    samples: tuple[tuple[float, float], ...]
    coefficients: np.ndarray
    residual: float
    targets: tuple[float, float, float] | None = None

    @property
    def c0(self) -> float:
        return float(self.coefficients[0])

    @property
    def c1(self) -> float:
        return float(self.coefficients[1])

    @property
    def c2(self) -> float:
        return float(self.coefficients[2])

    def agrees(self, tolerances: tuple[float, float, float] = FIT_TOLERANCES) -> bool:
        """目标非零的系数比较相对误差；目标为零的系数要求 |c| ≤ 10·残差 + 1e-10。"""
        if self.targets is None:
            return False
        values = (self.c0, self.c1, self.c2)
        for value, target, tol in zip(values, self.targets, tolerances, strict=True):
            if abs(target) > 1e-12:
                if abs(value - target) > tol * abs(target):
                    return False
            elif abs(value) > 10.0 * self.residual + 1e-10:
                return False
        return True

    @property
    def relative_errors(self) -> tuple[float, float, float] | None:
        if self.targets is None:
            return None
        errors = []
        for value, target in zip((self.c0, self.c1, self.c2), self.targets, strict=True):
            diff = abs(value - target)
            errors.append(diff / abs(target) if abs(target) > 1e-12 else diff)
        return errors[0], errors[1], errors[2]


def fit_short_time(
    samples: Sequence[tuple[float, float]],
    degree: int = DEFAULT_DEGREE,
    targets: tuple[float, float, float] | None = None,
) -> HeatContentFit:
    """
    用多项式拟合短时热含量样本。

    参数:
        samples: (t, f(t)) 序列，t 严格递增，至少 6 个。
        degree: 多项式次数，至少 2。
        targets: 几何目标值 (c0, c1, c2)，用于报告相对误差。

    返回:
        HeatContentFit: 拟合系数与残差（均方根）。
    """
    if degree < 2:
        raise ParameterError(f"拟合次数至少为 2，实际为 {degree}")
    if len(samples) < max(MIN_SAMPLES, degree + 2):
        raise ParameterError(f"至少需要 {max(MIN_SAMPLES, degree + 2)} 个样本")
    t = np.array([s[0] for s in samples], dtype=float)
    f = np.array([s[1] for s in samples], dtype=float)
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ParameterError("样本时间必须为正且严格递增")

    # 按 t_max 缩放列，使条件数只反映窗口的相对宽度
    scale = t[-1]
    vandermonde = np.vander(t / scale, degree + 1, increasing=True)
    condition = float(np.linalg.cond(vandermonde))
    if condition > _MAX_CONDITION:
        raise FitError(
            f"Vandermonde 矩阵条件数 {condition:.3e} 过大，请加宽时间窗口 "
            f"[{t[0]:g}, {t[-1]:g}] 或降低拟合次数"
        )
    scaled, *_ = np.linalg.lstsq(vandermonde, f, rcond=None)
    coefficients = scaled / scale ** np.arange(degree + 1)
    residual = float(np.sqrt(np.mean((vandermonde @ scaled - f) ** 2)))
    return HeatContentFit(
        samples=tuple(zip(t.tolist(), f.tolist(), strict=True)),
        coefficients=coefficients,
        residual=residual,
        targets=targets,
    )


@dataclass(frozen=True, eq=False)
class ShortTimeResult:
    """K_used 为模态求值器的模态数，或 Lanczos 求值器的迭代步数。"""

    fit: HeatContentFit
    window: tuple[float, float]
    widened: bool
    extrapolated: bool
    outside_theory: bool
    evaluator: str
    K_used: int


def weyl_mode_estimate(area: float, s: float) -> int:
    """由 Weyl 渐近 N(λ) ≈ |Ω|λ/(4π) 估计在时间 s 满足模态截断容差所需的模态数。"""
    return math.ceil(area * math.log(1.0 / MODAL_TOL_FACTOR) / (4.0 * math.pi * s))


def _select_engine(
    sys: SystemMatrices, t_min: float, evaluator: str, count: int
) -> HeatContentEvaluator:
    if evaluator == "auto":
        needed = weyl_mode_estimate(sys.area, t_min * t_min)
        if needed > min(count, sys.n_interior):
            logger.info(
                "模态截断在 t_min² 处无法满足容差，改用 Lanczos 求积",
                t_min=t_min,
                estimated_modes=needed,
                count=count,
            )
            return LanczosHeatContent(sys)
        evaluator = "modal"
    if evaluator == "lanczos":
        return LanczosHeatContent(sys)
    return ModalHeatContent(sys, eigenbasis(sys, min(count, sys.n_interior)))


def _sample_heat_content(
    sys: SystemMatrices,
    psi_fn: PsiFunction | None,
    times: np.ndarray,
    engine: HeatContentEvaluator,
) -> np.ndarray:
    psi = harmonic_test_function(sys, psi_fn)
    check_harmonic(sys, psi)
    values = []
    for t in times:
        result = engine.evaluate(psi, float(t))
        if result.truncated:
            logger.warning("热含量的谱截断未达到容差", t=float(t), evaluator=engine.name)
        values.append(result.value)
    return np.asarray(values)


def short_time_experiment(
    mesh: Mesh,
    psi_fn: PsiFunction | None = None,
    window: tuple[float, float] = DEFAULT_WINDOW,
    samples: int = DEFAULT_SAMPLES,
    degree: int = DEFAULT_DEGREE,
    extrapolate: bool = True,
    evaluator: str = "auto",
    count: int = 200,
) -> ShortTimeResult:
    """
    短时热含量实验：在窗口内采样 f(t)，可选地在 mesh 与 refine(mesh) 上做 Richardson 外推
    f* = (4 f_{h/2} - f_h)/3 以消去 O(h²) 离散误差，再做多项式拟合并与几何目标比较。

    evaluator 为 "modal" 时，若 t_min² 处截断不满足容差则逐步放宽 t_min 并记录；
    为 "auto" 时按 Weyl 估计判断模态数是否够用，不够则改用 Lanczos 求积；
    为 "lanczos" 时总是使用 Lanczos。

    返回:
        ShortTimeResult: 拟合结果、实际窗口以及各项标记。
    """
    if evaluator not in ("auto", "modal", "lanczos"):
        raise ParameterError(f"未知的热含量求值器 {evaluator!r}")
    t_min, t_max = window
    if not 0 < t_min < t_max:
        raise ParameterError(f"时间窗口必须满足 0 < t_min < t_max，实际为 {window}")
    outside_theory = mesh.spec is not None and mesh.spec.family is Family.POLYGON
    if outside_theory:
        logger.warning("多边形区域的短时展开超出光滑边界理论，拟合结果仅供参考")

    sys = assemble(mesh)
    engine = _select_engine(sys, t_min, evaluator, count)
    widened = False
    if isinstance(engine, ModalHeatContent):
        while engine.truncated_at(t_min):
            t_min *= _WIDEN_FACTOR
            widened = True
            if t_min >= 0.5 * t_max:
                raise FitError(f"模态数 {engine.basis.count} 不足，无法在窗口内满足截断容差")
        if widened:
            logger.warning("为满足截断容差放宽了 t_min", t_min=t_min, t_max=t_max)

    times = np.linspace(t_min, t_max, samples)
    values = _sample_heat_content(sys, psi_fn, times, engine)
    if extrapolate:
        fine_sys = assemble(refine(mesh))
        fine_engine = _select_engine(fine_sys, t_min, engine.name, count)
        fine = _sample_heat_content(fine_sys, psi_fn, times, fine_engine)
        values = (4.0 * fine - values) / 3.0

    psi = harmonic_test_function(sys, psi_fn)
    fit = fit_short_time(
        list(zip(times.tolist(), values.tolist(), strict=True)),
        degree=degree,
        targets=heat_content_targets(sys, psi),
    )
    logger.info(
        "短时热含量拟合完成",
        window=(float(t_min), float(t_max)),
        evaluator=engine.name,
        c0=fit.c0,
        c1=fit.c1,
        c2=fit.c2,
        residual=fit.residual,
    )
    return ShortTimeResult(
        fit=fit,
        window=(float(t_min), float(t_max)),
        widened=widened,
        extrapolated=extrapolate,
        outside_theory=outside_theory,
        evaluator=engine.name,
        K_used=engine.basis.count if isinstance(engine, ModalHeatContent) else engine.steps,
    )
