"""Compare 2-D annulus solutions with the radial shooting profile."""
import argparse

import numpy as np

from dsgraph import CurvatureSpec, DomainSpec, Problem, continuation_solve
from dsgraph.errors import BranchLossError, NonConvergenceError
from dsgraph.oracle import RadialProblem, shoot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--l", type=int, default=1)
    ap.add_argument("--sigma", type=float, default=1.5)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--inner", type=float, default=1.0)
    ap.add_argument("--outer", type=float, default=2.0)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128])
    args = ap.parse_args()

    spec = CurvatureSpec("quotient", args.l, 2)
    try:
        radial = shoot(RadialProblem(2, spec, args.sigma, args.eps, args.outer, rho_inner=args.inner))
    except BranchLossError as exc:
        print(f"no radial solution: {exc}")
        return
    print(f"shooting slope {radial.shooting_parameter:.10f}, mismatch {radial.mismatch:.1e}")
    print(f"{'N':>5} {'h':>9} {'sup diff':>10} {'/ h^2':>7}")
    for N in args.resolutions:
        prob = Problem(spec, args.sigma, args.eps, DomainSpec.annulus(args.inner, args.outer), N)
        try:
            sol = continuation_solve(prob)
        except NonConvergenceError as exc:
            print(f"{N:>5} solve failed: {exc}")
            continue
        diff = float(np.max(np.abs(sol.u - radial.interpolate(np.hypot(*sol.grid.coords.T)))))
        print(f"{N:>5} {sol.grid.h:>9.5f} {diff:>10.3e} {diff / sol.grid.h**2:>7.3f}")


if __name__ == "__main__":
    main()
