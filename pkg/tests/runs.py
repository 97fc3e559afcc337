"""Cached solver runs shared between test modules."""
import math
from functools import lru_cache

from dsgraph import CurvatureSpec, DomainSpec, Problem, SolverOptions, continuation_solve, newton_solve

SQRT3 = math.sqrt(3.0)
HARMONIC = CurvatureSpec("quotient", 1, 2)
SQUARE_EPS = (0.2, 0.1, 0.05)
SQUARE_N = 257


@lru_cache(maxsize=None)
def disk_run(resolution, sigma=2.0, eps=0.1, spec=HARMONIC):
    return continuation_solve(Problem(spec, sigma, eps, DomainSpec.disk(SQRT3), resolution))


@lru_cache(maxsize=None)
def square_runs(resolution=SQUARE_N):
    """Solutions on [-1,1]^2 at each eps of the schedule, each seeded from the previous stage."""
    base = Problem(HARMONIC, 2.0, SQUARE_EPS[0], DomainSpec.rectangle(-1, 1, -1, 1), resolution)
    sol = continuation_solve(base)
    out = [sol]
    for eps in SQUARE_EPS[1:]:
        start = sol.u - (sol.eps - eps)
        sol = newton_solve(base.with_eps(eps), SolverOptions(), start, sol.grid)
        out.append(sol)
    return tuple(out)
