"""Config-driven Monte Carlo experiments and the ``knnradar`` command line."""
from .config import ExperimentConfig, load
from .experiments import (
    ResultRow,
    calibrate_threshold,
    run_calibration,
    run_cfar_sweep,
    run_oracle_check,
    run_pd_curve,
    run_pfa,
    to_csv,
    wilson_interval,
)

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "calibrate_threshold",
    "load",
    "run_calibration",
    "run_cfar_sweep",
    "run_oracle_check",
    "run_pd_curve",
    "run_pfa",
    "to_csv",
    "wilson_interval",
]
