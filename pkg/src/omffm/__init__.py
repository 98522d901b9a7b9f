"""Filled-function solver for box-constrained multi-objective problems."""

from omffm.config import SolverConfig
from omffm.core import (
    Box,
    ParetoArchive,
    dominates,
    nondominated_filter,
    strictly_dominates,
)
from omffm.driver import RunReport, run_local_only, run_omffm
from omffm.local import local_weak_efficient
from omffm.problems import MopProblem, get_problem, problem_names

__all__ = [
    "Box",
    "MopProblem",
    "ParetoArchive",
    "RunReport",
    "SolverConfig",
    "dominates",
    "get_problem",
    "local_weak_efficient",
    "nondominated_filter",
    "problem_names",
    "run_local_only",
    "run_omffm",
    "strictly_dominates",
]

__version__ = "0.1.0"
