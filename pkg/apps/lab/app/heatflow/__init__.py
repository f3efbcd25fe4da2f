from app.heatflow.flux import (
    FluxProfile,
    boundary_flux,
    conormal_pairing,
    eigenspace_flux,
    flux_functional,
    flux_profile,
    mode_pairings,
    time_integrated_flux,
)
from app.heatflow.overdetermination import (
    DEFAULT_THRESHOLD,
    DEFAULT_TIMES,
    DiskNoise,
    OverdeterminationReport,
    TimeRegime,
    Verdict,
    calibrate_disk_noise,
    check_discrete_overdetermination,
    classify_times,
    measure_noise,
    summarize_profiles,
    zero_average_test_functions,
)
from app.heatflow.state import HeatState, heat_solution, heat_solution_fixed, propagate

__all__ = [
    "DEFAULT_THRESHOLD",
    "DEFAULT_TIMES",
    "DiskNoise",
    "FluxProfile",
    "HeatState",
    "OverdeterminationReport",
    "TimeRegime",
    "Verdict",
    "boundary_flux",
    "calibrate_disk_noise",
    "check_discrete_overdetermination",
    "classify_times",
    "conormal_pairing",
    "eigenspace_flux",
    "flux_functional",
    "flux_profile",
    "heat_solution",
    "heat_solution_fixed",
    "measure_noise",
    "mode_pairings",
    "propagate",
    "summarize_profiles",
    "time_integrated_flux",
    "zero_average_test_functions",
]
