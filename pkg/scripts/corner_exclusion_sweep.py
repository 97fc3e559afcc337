"""How the square's boundary-angle and Hessian statistics depend on the excluded corner block."""
import argparse

from dsgraph import CurvatureSpec, DomainSpec, Problem, continuation_solve
from dsgraph.solver import verify_solution


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[65, 129])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--cells", type=int, nargs="+", default=[0, 1, 2, 4, 8])
    args = ap.parse_args()

    spec = CurvatureSpec("quotient", 1, 2)
    print(f"{'N':>5} {'cells':>5} {'max|w-1/s|':>11} {'max-principle':>14} {'u|D2u|':>8}")
    for N in args.resolutions:
        sol = continuation_solve(Problem(spec, 2.0, args.eps, DomainSpec.rectangle(-1, 1, -1, 1), N))
        for c in args.cells:
            rep = verify_solution(sol.problem, sol, corner_cells=c)
            mp = "ok" if rep.checks["max_principle"] else "violated"
            print(f"{N:>5} {c:>5} {rep.boundary_angle_max_dev:>11.4f} {mp:>14} {rep.u_d2u_max:>8.2f}")


if __name__ == "__main__":
    main()
