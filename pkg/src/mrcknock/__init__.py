"""Gaussian knockoffs built by minimising reconstructability."""
from .covariance import CovModel, equicorrelated, estimate_covariance
from .errors import KnockoffError
from .filter import SelectionResult, evaluate, knockoff_threshold
from .rng import RngStream
from .samplers import (
    KnockoffDataset,
    construct_fixed_x,
    sample_gaussian_mx,
    sample_second_order,
    swap_columns,
)
from .sim import ExperimentConfig, ExperimentRecord, emit_csv, run_experiment
from .smatrix import (
    SMatrix,
    SolverOptions,
    approx_then_linesearch,
    loss_report,
    solve_equicorrelated,
    solve_maxent,
    solve_mvr,
    solve_sdp,
    solve_smatrix,
)
from .stats import StatVector, compute_statistic

__version__ = "0.1.0"

__all__ = [
    "CovModel", "equicorrelated", "estimate_covariance", "KnockoffError",
    "SelectionResult", "evaluate", "knockoff_threshold", "RngStream",
    "KnockoffDataset", "construct_fixed_x", "sample_gaussian_mx", "sample_second_order",
    "swap_columns", "ExperimentConfig", "ExperimentRecord", "emit_csv", "run_experiment",
    "SMatrix", "SolverOptions", "approx_then_linesearch", "loss_report", "solve_equicorrelated",
    "solve_maxent", "solve_mvr", "solve_sdp", "solve_smatrix", "StatVector", "compute_statistic",
]
