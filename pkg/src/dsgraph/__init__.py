"""Constant-curvature spacelike graphs in the half-space model of de Sitter space."""

from .curvfn import CurvatureSpec
from .domaingrid import DomainSpec, build_grid
from .solver import Problem, SolverOptions, continuation_solve, newton_solve, verify_solution

__all__ = [
    "CurvatureSpec",
    "DomainSpec",
    "Problem",
    "SolverOptions",
    "build_grid",
    "continuation_solve",
    "newton_solve",
    "verify_solution",
]
__version__ = "0.1.0"
