from app.services.config import ExperimentConfig, HeatContentSettings, apply_overrides, load_config
from app.services.experiments import SUBCOMMANDS, ExperimentOutcome, ExperimentRunner
from app.services.reports import format_report, read_report, write_report

__all__ = [
    "SUBCOMMANDS",
    "ExperimentConfig",
    "ExperimentOutcome",
    "ExperimentRunner",
    "HeatContentSettings",
    "apply_overrides",
    "format_report",
    "load_config",
    "read_report",
    "write_report",
]
