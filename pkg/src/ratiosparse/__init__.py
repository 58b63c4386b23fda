"""Sparse recovery with the scale-invariant l1/2-over-l2 ratio penalty."""

from .core import (
    ConjugateGradient,
    ProblemInstance,
    ResidualBalance,
    SolveResult,
    SolverConfig,
    load_instance,
    objective_h,
    ratio_half_over_two,
    save_instance,
)
from .solver import admm_solve

__version__ = "0.1.0"
