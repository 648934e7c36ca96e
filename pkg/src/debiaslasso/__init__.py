"""Debiased Lasso inference with small node-wise tuning parameters."""

from .cv import CvResult, kfold_cv
from .data import CenteringRecord, Dataset, center, expand_interactions, load_csv, scale_columns
from .errors import CalibrationError, DataError, DebiasLassoError, DegenerateError, SimulationAborted
from .inference import InferenceResult, debias, decomposition_check, sigma_hat_1se, tune_outcome
from .lasso import (
    DEFAULT_CONFIG,
    LambdaGrid,
    LassoFit,
    SolverConfig,
    default_path_ratio,
    fit_lasso,
    fit_path,
    kkt_violation,
    lambda_max,
    lambda_path,
    solve_lasso,
)
from .nodewise import NodewiseFit, TuneTrace, bias_factor, fit_nodewise, omega, trace_grid
from .selectors import (
    Branch,
    CandidateGrid,
    StpsResult,
    build_candidate_grid,
    select_by_rule,
    select_cv_nodewise,
    select_stps,
    select_zz,
    universal_lambda,
)
from .simulate import SimConfig, SimReport, population_tau1_sq, run_simulation

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "CalibrationError",
    "CandidateGrid",
    "CenteringRecord",
    "CvResult",
    "DEFAULT_CONFIG",
    "DataError",
    "Dataset",
    "DebiasLassoError",
    "DegenerateError",
    "InferenceResult",
    "LambdaGrid",
    "LassoFit",
    "NodewiseFit",
    "SimConfig",
    "SimReport",
    "SimulationAborted",
    "SolverConfig",
    "StpsResult",
    "TuneTrace",
    "bias_factor",
    "build_candidate_grid",
    "center",
    "debias",
    "decomposition_check",
    "default_path_ratio",
    "expand_interactions",
    "fit_lasso",
    "fit_nodewise",
    "fit_path",
    "kfold_cv",
    "kkt_violation",
    "lambda_max",
    "lambda_path",
    "load_csv",
    "omega",
    "population_tau1_sq",
    "run_simulation",
    "scale_columns",
    "select_by_rule",
    "select_cv_nodewise",
    "select_stps",
    "select_zz",
    "sigma_hat_1se",
    "solve_lasso",
    "trace_grid",
    "tune_outcome",
    "universal_lambda",
]
