from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import structlog

from app.errors import ParameterError
from app.geometry.curvature import boundary_curvature
from app.geometry.mesh import Mesh
from app.heatflow.overdetermination import Verdict

logger = structlog.get_logger(__name__)

DEFAULT_CURVATURE_THRESHOLD = 0.02


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    kappa: np.ndarray
    mean: float
    relative_std: float
    kappa_min: float
    kappa_max: float
    threshold: float
    verdict: Verdict


def curvature_constancy_check(
    mesh: Mesh, threshold: float = DEFAULT_CURVATURE_THRESHOLD
) -> CurvatureReport:
    """
    外边界曲率的弧长加权相对标准差；接近零说明边界是圆（常平均曲率）。

    多边形边界的曲率集中在角点上，不适用此检查。
    """
    if mesh.spec is not None and not mesh.spec.smooth:
        raise ParameterError("曲率常数性检查要求光滑边界的形状族")
    loop = mesh.boundary_loops[0]
    p = mesh.vertices[loop]
    edge = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    dual = 0.5 * (edge + np.roll(edge, 1))

    kappa = boundary_curvature(mesh, 0)
    mean = float(dual @ kappa / dual.sum())
    spread = math.sqrt(float(dual @ (kappa - mean) ** 2 / dual.sum()))
    relative_std = spread / abs(mean)
    verdict = Verdict.PASS if relative_std <= threshold else Verdict.FAIL
    logger.info(
        "边界曲率常数性检查",
        mean=mean,
        relative_std=relative_std,
        verdict=verdict.value,
    )
    return CurvatureReport(
        kappa=kappa,
        mean=mean,
        relative_std=relative_std,
        kappa_min=float(kappa.min()),
        kappa_max=float(kappa.max()),
        threshold=threshold,
        verdict=verdict,
    )
