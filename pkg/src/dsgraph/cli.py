"""Command line front end: ``dsgraph {solve,verify,dualize,oracle,curvature,selftest}``.

Exit codes: 0 success, 2 numerical failure, 3 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import curvfn, duality, geometry, oracle, solver
from .curvfn import CurvatureSpec
from .domaingrid import DomainSpec, build_grid, field_from_csv, field_to_csv
from .errors import BranchLossError, ConfigError, DSGraphError, NonConvergenceError
from .exactsol import fit_cap_to_disk

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_INVALID = 3

ARTIFACTS = ("solution", "verification", "dual", "oracle")


@dataclass
class ProblemConfig:
    domain: dict
    family: str = "quotient"
    l: int = 1
    n: int | None = None
    sigma: float = 2.0
    eps: float = 0.1
    eps_schedule: list | None = None
    resolution: int = 64


@dataclass
class SolverConfig:
    newton_tol: float = 1e-8
    max_newton_iters: int = 40
    damping_min: float = 2.0**-30
    jacobian_mode: str = "analytic"
    sigma_continuation: bool = True
    sigma_steps: int = 8
    max_bisections: int = 8


@dataclass
class OutputConfig:
    directory: str = "out"
    artifacts: list = field(default_factory=lambda: ["solution", "verification"])


@dataclass
class RunConfig:
    problem: ProblemConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def domain_spec(self):
        d = dict(self.problem.domain)
        if set(d) != {"kind", "params"}:
            raise ConfigError("problem.domain takes exactly the keys 'kind' and 'params'")
        return DomainSpec(d["kind"], tuple(d["params"]))

    def curvature_spec(self):
        dom = self.domain_spec()
        n = dom.dim if self.problem.n is None else int(self.problem.n)
        return CurvatureSpec(self.problem.family, int(self.problem.l), n)

    def build_problem(self):
        p = self.problem
        return solver.Problem(self.curvature_spec(), float(p.sigma), float(p.eps), self.domain_spec(), p.resolution)

    def build_options(self):
        s = self.solver
        return solver.SolverOptions(
            newton_tol=s.newton_tol,
            max_newton_iters=s.max_newton_iters,
            damping_min=s.damping_min,
            eps_schedule=self.problem.eps_schedule,
            jacobian_mode=s.jacobian_mode,
            sigma_continuation=s.sigma_continuation,
            sigma_steps=s.sigma_steps,
            max_bisections=s.max_bisections,
        )

    def to_dict(self):
        return asdict(self)


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return cls(**data)


def parse_config(data) -> RunConfig:
    """Build a :class:`RunConfig` from parsed JSON; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - {"problem", "solver", "outputs", "seed"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    if "problem" not in data:
        raise ConfigError("config needs a 'problem' block")
    try:
        cfg = RunConfig(
            problem=_strict(ProblemConfig, data["problem"], "problem"),
            solver=_strict(SolverConfig, data.get("solver", {}), "solver"),
            outputs=_strict(OutputConfig, data.get("outputs", {}), "outputs"),
            seed=int(data.get("seed", 0)),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    bad = sorted(set(cfg.outputs.artifacts) - set(ARTIFACTS))
    if bad:
        raise ConfigError(f"unknown artifact(s): {', '.join(bad)}; choose from {ARTIFACTS}")
    # validate every invariant before any computation
    problem = cfg.build_problem()
    cfg.build_options().schedule(problem)
    return cfg


def load_config(path, overrides=None) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for key, val in (overrides or {}).items():
        if val is not None:
            data.setdefault("problem", {})[key] = val
    if overrides and overrides.get("eps") is not None:
        sched = data["problem"].get("eps_schedule")
        if sched:
            raise ConfigError("--eps cannot be combined with a config eps_schedule")
    return parse_config(data)


def _dump_json(obj, path):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"
    Path(path).write_text(text)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _out_dir(args, cfg=None):
    d = Path(args.out_dir or (cfg.outputs.directory if cfg else "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


# ---------------------------------------------------------------- solve


def _verification_payload(cfg, sol, report):
    return {
        "config": cfg.to_dict(),
        "converged": bool(sol.converged),
        "residual": sol.residual,
        "eps": sol.eps,
        "iterations": sol.log,
        "report": report.to_dict(),
        "passed": report.passed,
    }


def cmd_solve(args):
    cfg = load_config(args.config, _overrides(args))
    problem, options = cfg.build_problem(), cfg.build_options()
    out = _out_dir(args, cfg)
    try:
        sol = solver.continuation_solve(problem, options)
    except (NonConvergenceError, DSGraphError, ValueError) as exc:
        return _fail(EXIT_NUMERICAL, f"solve failed: {exc}")
    report = solver.verify_solution(problem, sol)
    arts = set(cfg.outputs.artifacts)
    if "solution" in arts:
        (out / "solution.csv").write_text(field_to_csv(sol.grid, sol.u))
        _dump_json({"config": cfg.to_dict(), "converged": True, "residual": sol.residual}, out / "solution.json")
    if "verification" in arts:
        _dump_json(_verification_payload(cfg, sol, report), out / "verification.json")
    if "dual" in arts:
        dual, drep = duality.dualize_solution(sol, problem.spec, problem.sigma)
        _write_dual(out, dual, drep)
    if "oracle" in arts:
        _oracle_outputs(cfg, out, sol)
    print(f"converged: eps={sol.eps:g} residual={sol.residual:.3e} "
          f"boundary_angle_max_dev={report.boundary_angle_max_dev:.6g}")
    return EXIT_OK


def _overrides(args):
    return {"sigma": args.sigma, "eps": args.eps, "resolution": args.resolution}


# ---------------------------------------------------------------- stored runs


def load_run(run_dir):
    """Rebuild ``(config, problem, Solution)`` from a directory written by ``solve``."""
    run_dir = Path(run_dir)
    try:
        meta = json.loads((run_dir / "solution.json").read_text())
        text = (run_dir / "solution.csv").read_text()
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read stored run in {run_dir}: {exc}") from exc
    if not isinstance(meta, dict) or "config" not in meta:
        raise ConfigError("solution.json lacks a 'config' block")
    cfg = parse_config(meta["config"])
    problem = cfg.build_problem()
    try:
        coords, is_b, u = field_from_csv(text)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed solution.csv: {exc}") from exc
    grid = build_grid(problem.domain, problem.resolution)
    if coords.shape != grid.coords.shape or not np.allclose(coords, grid.coords, rtol=0, atol=1e-12):
        raise ConfigError("solution.csv nodes do not match the configured grid")
    if not np.array_equal(is_b, grid.is_boundary):
        raise ConfigError("solution.csv boundary flags do not match the configured grid")
    sol = solver.Solution(
        problem=problem, grid=grid, u=u, kappa_min=None, kappa_max=None, w=None,
        log=[], converged=bool(meta.get("converged", False)), residual=meta.get("residual"),
    )
    return cfg, problem, sol


RESIDUAL_TOL = 1e-6


def cmd_verify(args):
    cfg, problem, sol = load_run(args.run_dir)
    if not sol.converged:
        return _fail(EXIT_NUMERICAL, "stored run is not marked converged")
    report = solver.verify_solution(problem, sol)
    try:
        res = float(np.max(np.abs(solver.residual(problem, sol.u, sol.grid))))
    except DSGraphError:
        res = math.inf
    checks = dict(report.checks)
    checks["equation_residual"] = res <= RESIDUAL_TOL
    width = max(len(k) for k in checks)
    for name, ok in checks.items():
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}")
    print(f"{'residual':<{width}}  {res:.3e}")
    if args.out_dir:
        out = _out_dir(args)
        payload = {"report": report.to_dict(), "checks": checks, "residual": res}
        _dump_json(payload, out / "verify.json")
    return EXIT_OK if all(checks.values()) else EXIT_NUMERICAL


# ---------------------------------------------------------------- dualize

DUAL_COLUMNS = ("node_id", "y1", "y2", "v", "kappa_star")


def _write_dual(out, dual, report):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(DUAL_COLUMNS)
    for i, y, v, ks in dual.to_rows():
        y2 = repr(y[1]) if len(y) > 1 else ""
        wr.writerow([i, repr(y[0]), y2, repr(v), ";".join(repr(k) for k in ks)])
    (out / "dual.csv").write_text(buf.getvalue())
    payload = asdict(report)
    payload["hull"] = dual.hull
    payload["passed"] = report.passed
    _dump_json(payload, out / "duality.json")


def cmd_dualize(args):
    cfg, problem, sol = load_run(args.run_dir)
    try:
        dual, report = duality.dualize_solution(sol, problem.spec, problem.sigma)
    except DSGraphError as exc:
        return _fail(EXIT_NUMERICAL, f"dualize failed: {exc}")
    out = _out_dir(args, cfg)
    _write_dual(out, dual, report)
    print(f"target 1/sigma={report.target:.6g} "
          f"max|f*(kappa*)-1/sigma|={report.reciprocal_f_star_max_dev:.3e} "
          f"interpolated={report.interpolated_f_star_max_dev:.3e}")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


# ---------------------------------------------------------------- oracle

PROFILE_COLUMNS = ("rho", "u", "du", "kappa_r", "kappa_t")


def _radial_problem(cfg):
    dom = cfg.domain_spec()
    spec = cfg.curvature_spec()
    p = cfg.problem
    if dom.kind == "disk":
        return oracle.RadialProblem(spec.n, spec, float(p.sigma), float(p.eps), dom.params[2])
    if dom.kind == "annulus":
        return oracle.RadialProblem(spec.n, spec, float(p.sigma), float(p.eps), dom.params[3], dom.params[2])
    if dom.kind == "interval" and math.isclose(-dom.params[0], dom.params[1]):
        return oracle.RadialProblem(spec.n, spec, float(p.sigma), float(p.eps), dom.params[1])
    raise ConfigError("the radial oracle needs a disk, an annulus or a symmetric interval")


def compare_to_profile(sol, radial):
    """Sup difference between a grid solution and a radial profile, plus ``h`` for scale."""
    center = sol.grid.domain.center()
    rho = np.linalg.norm(sol.grid.coords - center, axis=1)
    err = sol.u - radial.interpolate(rho)
    diff = float(np.max(np.abs(err)))
    h = sol.grid.h
    return {
        "sup_difference": diff,
        "l2_difference": float(np.sqrt(np.mean(err**2))),
        "h": h,
        "ratio_to_h2": diff / h**2,
    }


def _oracle_outputs(cfg, out, sol=None):
    rp = _radial_problem(cfg)
    radial = oracle.shoot(rp)
    kr, kt = radial.curvatures()
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(PROFILE_COLUMNS)
    for row in zip(radial.rho, radial.u, radial.du, kr, kt):
        wr.writerow([repr(float(v)) for v in row])
    (out / "radial_profile.csv").write_text(buf.getvalue())
    payload = {
        "mismatch": radial.mismatch,
        "refinement_change": radial.refinement_change,
        "shooting_parameter": radial.shooting_parameter,
    }
    if sol is not None:
        payload["comparison"] = compare_to_profile(sol, radial)
    _dump_json(payload, out / "oracle.json")
    return payload


def cmd_oracle(args):
    cfg = load_config(args.config, _overrides(args))
    out = _out_dir(args, cfg)
    sol = None
    if args.compare:
        _, _, sol = load_run(args.compare)
    try:
        payload = _oracle_outputs(cfg, out, sol)
    except (BranchLossError, NonConvergenceError) as exc:
        return _fail(EXIT_NUMERICAL, f"shooting failed: {exc}")
    print(f"mismatch={payload['mismatch']:.3e} refinement_change={payload['refinement_change']:.3e}")
    if "comparison" in payload:
        c = payload["comparison"]
        print(f"sup difference vs grid solution {c['sup_difference']:.3e} ({c['ratio_to_h2']:.3f} h^2)")
    return EXIT_OK


# ---------------------------------------------------------------- curvature


def cmd_curvature(args):
    lam = np.array(args.lam, dtype=float)
    spec = CurvatureSpec(args.family, args.l, len(lam))
    if not np.all(lam > 0):
        return _fail(EXIT_INVALID, "lambda must lie in the positive cone")
    out = {
        "spec": {"family": spec.family, "l": spec.l, "n": spec.n},
        "lambda": lam,
        "f": float(curvfn.eval_f(spec, lam)),
        "grad": curvfn.grad_f(spec, lam),
        "dual": float(curvfn.dual_eval(spec, lam)),
    }
    if args.check:
        rep = curvfn.check_structure(spec, args.samples, args.seed)
        out["structure"] = {"all_ok": rep.all_ok, "details": rep.details}
    print(json.dumps(_plain(out), indent=2, sort_keys=True))
    return EXIT_OK if out.get("structure", {}).get("all_ok", True) else EXIT_NUMERICAL


# ---------------------------------------------------------------- selftest


def _random_jets(rng, n, count):
    x = rng.uniform(-1, 1, (count, n))
    u = rng.uniform(0.05, 3.0, count)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    Du = d * rng.uniform(0, 0.95, (count, 1))
    M = rng.normal(size=(count, n, n))
    D2u = 0.5 * (M + np.swapaxes(M, 1, 2)) * rng.uniform(0.1, 3.0, (count, 1, 1))
    return geometry.PointJet(x, u, Du, D2u)


def selftest(seed=0, max_n=4, samples=2000):
    """Property suite; returns ``{name: bool}``."""
    rng = np.random.default_rng(seed)
    results = {}
    for n in range(1, max_n + 1):
        for spec in curvfn.all_specs(n):
            rep = curvfn.check_structure(spec, samples, seed)
            results[f"structure {spec.family} l={spec.l} n={n}"] = bool(rep.all_ok)
    for n in range(1, min(max_n, 3) + 1):
        jets = _random_jets(rng, n, samples)
        ev = geometry.eval_jet(jets)
        pred = jets.u[:, None] * ev.kappa_tilde + 1.0 / ev.w[:, None]
        rel = np.abs(ev.kappa - pred) / np.maximum(1.0, np.abs(ev.kappa))
        results[f"kappa relation n={n}"] = bool(np.max(rel) <= 1e-10)
        pos_a = np.linalg.eigvalsh(ev.a_desitter)[:, 0] > 0
        pos_p = np.linalg.eigvalsh(ev.p_hessian)[:, 0] > 0
        results[f"convexity equivalence n={n}"] = bool(np.all(pos_a == pos_p))
        y, v, gv = duality.gauss_map(jets)
        xb, ub = duality.gauss_map_inverse(y, v, gv)
        results[f"gauss map round trip n={n}"] = bool(
            np.max(np.abs(xb - jets.x)) <= 1e-10 and np.max(np.abs(ub - jets.u) / jets.u) <= 1e-10
        )
        leg = duality.legendre_pair(jets)
        scale = 1.0 + np.abs(np.sum(jets.x * y, axis=1))
        results[f"legendre identity n={n}"] = bool(np.max(np.abs(leg.defect) / scale) <= 1e-12)
    for n in range(1, min(max_n, 2) + 1):
        spec = CurvatureSpec("quotient", n - 1, n)
        rp = oracle.RadialProblem(n, spec, 2.0, 0.1, math.sqrt(3.0))
        radial = oracle.shoot(rp, n_out=401)
        cap = fit_cap_to_disk(rp.rho_outer, rp.sigma, rp.eps, n=1)
        err = np.max(np.abs(radial.u - cap.height(radial.rho[:, None])))
        results[f"oracle cap reproduction n={n}"] = bool(err <= 1e-8)
    return results


def cmd_selftest(args):
    results = selftest(args.seed, args.max_n, args.samples)
    width = max(len(k) for k in results)
    for name, ok in results.items():
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all(results.values()) else EXIT_NUMERICAL


# ---------------------------------------------------------------- entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="dsgraph", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
            p.add_argument("--sigma", type=float)
            p.add_argument("--eps", type=float)
            p.add_argument("--resolution", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="solve and verify")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-run verification on a stored run")
    p.add_argument("run_dir")
    common(p, config=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dualize", help="dual graph and dual-equation report for a stored run")
    p.add_argument("run_dir")
    common(p, config=False)
    p.set_defaults(func=cmd_dualize)

    p = sub.add_parser("oracle", help="radial shooting profile")
    common(p)
    p.add_argument("--compare", help="stored run to compare against")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("curvature", help="evaluate a curvature function")
    p.add_argument("--family", default="quotient", choices=("quotient", "symroot"))
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", required=True)
    p.add_argument("--check", action="store_true", help="also run the structure suite")
    p.add_argument("--samples", type=int, default=10_000)
    common(p, config=False)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("selftest", help="property suite")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--samples", type=int, default=2000)
    common(p, config=False)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_INVALID, str(exc))
    except DSGraphError as exc:
        return _fail(EXIT_NUMERICAL, str(exc))
    except ValueError as exc:
        return _fail(EXIT_INVALID, str(exc))


if __name__ == "__main__":
    sys.exit(main())
