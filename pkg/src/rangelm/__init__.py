"""Range-relaxed Levenberg-Marquardt for nonlinear ill-posed problems."""

from .linalg import InnerProduct, LinearOperator, adjoint_mismatch, cg_solve, inner, norm
from .problems import ProblemInstance, linear_diagonal, nonlinear_exp
from .solver import IterationRecord, RunResult, SolverConfig, run, validate_config
from .tikhonov import SubproblemResult, interval_search, linres_profile, solve_subproblem

__version__ = "0.1.0"

__all__ = [
    "InnerProduct",
    "IterationRecord",
    "LinearOperator",
    "ProblemInstance",
    "RunResult",
    "SolverConfig",
    "SubproblemResult",
    "adjoint_mismatch",
    "cg_solve",
    "inner",
    "interval_search",
    "linear_diagonal",
    "linres_profile",
    "nonlinear_exp",
    "norm",
    "run",
    "solve_subproblem",
    "validate_config",
]
