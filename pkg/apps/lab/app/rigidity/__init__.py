from app.rigidity.curvature_check import CurvatureReport, curvature_constancy_check
from app.rigidity.heatcontent import (
    HeatContentEvaluator,
    HeatContentFit,
    LanczosHeatContent,
    ModalHeatContent,
    ShortTimeResult,
    fit_short_time,
    harmonic_test_function,
    heat_content,
    heat_content_targets,
    short_time_experiment,
)
from app.rigidity.interior import InteriorReport, interface_flux, interior_surface_check
from app.rigidity.mechanism import (
    PairingReport,
    mode_mechanism,
    relative_noise,
    zero_average_annihilation,
)
from app.rigidity.torsion import TorsionPair, serrin_check, spectral_torsion, torsion

__all__ = [
    "CurvatureReport",
    "HeatContentEvaluator",
    "HeatContentFit",
    "InteriorReport",
    "LanczosHeatContent",
    "ModalHeatContent",
    "PairingReport",
    "ShortTimeResult",
    "TorsionPair",
    "curvature_constancy_check",
    "fit_short_time",
    "harmonic_test_function",
    "heat_content",
    "heat_content_targets",
    "interface_flux",
    "interior_surface_check",
    "mode_mechanism",
    "relative_noise",
    "serrin_check",
    "short_time_experiment",
    "spectral_torsion",
    "torsion",
    "zero_average_annihilation",
]
