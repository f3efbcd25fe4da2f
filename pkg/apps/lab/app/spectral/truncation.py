import math
from typing import NamedTuple

import numpy as np
import structlog

from app.errors import ParameterError
from app.spectral.basis import EigenBasis

logger = structlog.get_logger(__name__)


class Truncation(NamedTuple):
    index: int
    limited: bool
    tail: float


def beyond_count_bound(basis: EigenBasis, t: float) -> float:
    """
    已算模态之外的尾项上界。

    假设 λ_{count+j} ≥ λ_count + C·j（C 为 Li–Yau 型常数），|α_k| ≤ √|Ω|，
    ‖φ_k‖_∞ 取已算模态中的最大值，对 j 求几何级数。
    """
    c = basis.li_yau_constant
    ratio = math.exp(-c * t)
    geometric = ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
    phi_max = float(basis.sup_norms.max())
    return math.exp(-basis.lambdas[-1] * t) * geometric * math.sqrt(basis.area) * phi_max


def tail_bounds(basis: EigenBasis, t: float) -> np.ndarray:
    """tails[K-1] 是截断到前 K 项后剩余部分的可计算上界，K = 1..count。"""
    terms = np.abs(basis.alphas) * np.exp(-basis.lambdas * t) * basis.sup_norms
    # suffix[k] = Σ_{j≥k} terms[j]
    suffix = np.cumsum(terms[::-1])[::-1]
    within = np.append(suffix[1:], 0.0)
    return within + beyond_count_bound(basis, t)


def truncation_index(basis: EigenBasis, t: float, tol: float) -> Truncation:
    """
    满足尾项界 ≤ tol 的最小截断项数 K。

    参数:
        basis: 特征基。
        t: 时间，必须为正。
        tol: 允许的尾项（无穷大表示不作约束）。

    返回:
        Truncation: (index, limited, tail)。若已算模态不足以达到 tol，
        index 取 count 且 limited 为 True。
    """
    if not t > 0:
        raise ParameterError(f"时间必须为正，实际为 {t}")
    if not tol > 0:
        raise ParameterError(f"容差必须为正，实际为 {tol}")
    if math.isinf(tol):
        return Truncation(1, False, float(tail_bounds(basis, t)[0]))

    tails = tail_bounds(basis, t)
    feasible = np.flatnonzero(tails <= tol)
    if feasible.size:
        index = int(feasible[0]) + 1
        return Truncation(index, False, float(tails[index - 1]))

    logger.warning(
        "可用模态不足以满足截断容差",
        t=t,
        tol=tol,
        count=basis.count,
        tail=float(tails[-1]),
    )
    return Truncation(basis.count, True, float(tails[-1]))
