"""Grid convergence of the disk solver against the exact umbilic cap."""
import argparse
import math

import numpy as np

from dsgraph import CurvatureSpec, DomainSpec, Problem, continuation_solve
from dsgraph.exactsol import fit_cap_to_disk


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--l", type=int, default=1)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[16, 32, 64, 128])
    args = ap.parse_args()

    radius = math.sqrt(3)
    spec = CurvatureSpec("quotient", args.l, 2)
    cap = fit_cap_to_disk(radius, args.sigma, args.eps)
    print(f"{'N':>5} {'h':>10} {'sup error':>12} {'order':>6} {'iters':>6}")
    prev = None
    for N in args.resolutions:
        sol = continuation_solve(Problem(spec, args.sigma, args.eps, DomainSpec.disk(radius), N))
        err = float(np.max(np.abs(sol.u - cap.height(sol.grid.coords))))
        order = "" if prev is None else f"{math.log(prev[1] / err) / math.log(prev[0] / sol.grid.h):6.2f}"
        print(f"{N:>5} {sol.grid.h:>10.5f} {err:>12.3e} {order:>6} {len(sol.log) - 1:>6}")
        prev = (sol.grid.h, err)


if __name__ == "__main__":
    main()
