"""Sparse portfolio selection with the fraction penalty.

Closed-form thresholding for ``rho_a(t) = a|t| / (a|t| + 1)``, the
iterative thresholding solvers with and without short selling, reference
baselines, Fama-French style data handling and an out-of-sample backtest.
"""

from .baselines import exact_cardinality, l1_penalized, markowitz_equality
from .data import ReturnsPanel, WindowPlan, compute_beta, default_plan, parse_returns_csv, slice_window
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FracportError,
    MissingDataError,
    NumericDomainError,
    SingularSystemError,
    SolverError,
)
from .ifpt import FixedLambda, SolverConfig, TargetSparsity, Termination, ifpt_solve, lambda_bar
from .infpt import infpt_solve, prox_nonneg
from .penalty import PenaltyParams, penalty, rho
from .problem import ObjectiveParams, PortfolioProblem, build_problem
from .prox import ProxParams, prox_scalar, prox_vector, threshold

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DimensionError", "FixedLambda", "FracportError",
    "MissingDataError", "NumericDomainError", "ObjectiveParams", "PenaltyParams",
    "PortfolioProblem", "ProxParams", "ReturnsPanel", "SingularSystemError", "SolverConfig",
    "SolverError", "TargetSparsity", "Termination", "WindowPlan", "build_problem",
    "compute_beta", "default_plan", "exact_cardinality", "ifpt_solve", "infpt_solve",
    "l1_penalized", "lambda_bar", "markowitz_equality", "parse_returns_csv", "penalty",
    "prox_nonneg", "prox_scalar", "prox_vector", "rho", "slice_window", "threshold",
]
