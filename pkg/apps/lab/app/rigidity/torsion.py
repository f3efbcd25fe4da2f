from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog

from app.errors import ParameterError
from app.fem.assembly import SystemMatrices
from app.fem.poisson import solve_dirichlet_poisson
from app.heatflow.flux import FluxProfile, flux_profile
from app.spectral.basis import EigenBasis

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class TorsionPair:
    """扭转函数的两种计算：直接求解 -ΔΦ = 1 与谱级数 Σ λ_k⁻¹ α_k φ_k。"""

    direct: np.ndarray
    spectral: np.ndarray
    discrepancy: float
    K: int


def spectral_torsion(basis: EigenBasis, K: int) -> np.ndarray:
    return basis.modes[:, :K] @ (basis.alphas[:K] / basis.lambdas[:K])


def torsion(sys: SystemMatrices, basis: EigenBasis, K: int) -> TorsionPair:
    """
    直接求解与 K 项谱级数的扭转函数，以及两者的相对 L²(Ω) 差异。

    离散层面直接解恰好等于全部离散模态的级数，差异只来自截断。
    """
    if not 1 <= K <= basis.count:
        raise ParameterError(f"模态数必须在 [1, {basis.count}] 内，实际为 {K}")
    direct = solve_dirichlet_poisson(sys, np.ones(sys.n_vertices))
    spectral = spectral_torsion(basis, K)
    discrepancy = sys.m_norm(direct - spectral) / sys.m_norm(direct)

    for name, field in (("direct", direct), ("spectral", spectral)):
        interior = sys.restrict(field)
        if interior.min() <= 0:
            logger.warning(
                "扭转函数在内部顶点处非正（角点附近的离散效应）",
                field=name,
                minimum=float(interior.min()),
                count=int(np.sum(interior <= 0)),
            )
    logger.debug("扭转函数交叉验证", K=K, discrepancy=discrepancy)
    return TorsionPair(direct=direct, spectral=spectral, discrepancy=discrepancy, K=K)


def serrin_check(sys: SystemMatrices, pair: TorsionPair) -> FluxProfile:
    """直接扭转函数的边界通量（ΔΦ ≡ -1）；偏差接近零当且仅当区域（离散地）是球。"""
    return flux_profile(sys, pair.direct, -np.ones(sys.n_vertices))
