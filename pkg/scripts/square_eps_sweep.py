"""Boundary angle and Hessian bound on the square as the boundary height decreases."""
import argparse

from dsgraph import CurvatureSpec, DomainSpec, Problem, SolverOptions, continuation_solve, newton_solve
from dsgraph.solver import verify_solution


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=129)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--corner-cells", type=int, default=1)
    args = ap.parse_args()

    base = Problem(CurvatureSpec("quotient", 1, 2), args.sigma, args.eps[0],
                   DomainSpec.rectangle(-1, 1, -1, 1), args.resolution)
    sol = continuation_solve(base)
    print(f"{'eps':>6} {'max|w-1/s|':>11} {'ratio':>6} {'u|D2u|':>8} {'smooth':>7} {'kappa range':>18}")
    prev = None
    for k, eps in enumerate(args.eps):
        if k:
            sol = newton_solve(base.with_eps(eps), SolverOptions(), sol.u - (sol.eps - eps), sol.grid)
        rep = verify_solution(sol.problem, sol, corner_cells=args.corner_cells)
        dev = rep.boundary_angle_max_dev
        ratio = "" if prev is None else f"{prev / dev:6.2f}"
        kr = f"[{rep.kappa_range[0]:.3f}, {rep.kappa_range[1]:.3f}]"
        print(f"{eps:>6g} {dev:>11.4f} {ratio:>6} {rep.u_d2u_max:>8.2f} {rep.u_d2u_max_smooth:>7.2f} {kr:>18}")
        prev = dev


if __name__ == "__main__":
    main()
