from app.sphereband.flow import (
    BandTorsion,
    ConstantFlowReport,
    band_flux,
    band_torsion,
    constant_flow_report,
)
from app.sphereband.geometry import BandSpec
from app.sphereband.solver import BandEigenBasis, BandSystem, assemble_band, band_eigenbasis

__all__ = [
    "BandEigenBasis",
    "BandSpec",
    "BandSystem",
    "BandTorsion",
    "ConstantFlowReport",
    "assemble_band",
    "band_eigenbasis",
    "band_flux",
    "band_torsion",
    "constant_flow_report",
]
