"""Simulation studies: rate scaling, misspecification, reports."""

from .misspec import (
    MisspecStudyConfig,
    ProjectionError,
    generate_misspecified_dataset,
    oracle_minimizer,
    project_l1_ball,
    quadratic_risk,
    run_misspec_study,
)
from .rates import (
    CellResult,
    CheckResult,
    RateReport,
    RateStudyConfig,
    SlopeFit,
    SlopeRow,
    exceedance_bound,
    fit_rate_slope,
    run_rate_study,
)
from .report import emit_report, read_cells
from .setup import ModelSetup, StudyConfigError, predicted_rate

__all__ = [
    "CellResult",
    "CheckResult",
    "MisspecStudyConfig",
    "ModelSetup",
    "ProjectionError",
    "RateReport",
    "RateStudyConfig",
    "SlopeFit",
    "SlopeRow",
    "StudyConfigError",
    "emit_report",
    "exceedance_bound",
    "fit_rate_slope",
    "generate_misspecified_dataset",
    "oracle_minimizer",
    "predicted_rate",
    "project_l1_ball",
    "quadratic_risk",
    "read_cells",
    "run_misspec_study",
    "run_rate_study",
]
