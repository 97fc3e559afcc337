"""Acceptance criteria 1-11; each test prints one ``CRITERION k: PASS/FAIL`` line."""
import math

import numpy as np
import pytest

from dsgraph import (
    CurvatureSpec,
    DomainSpec,
    Problem,
    continuation_solve,
    curvfn,
    geometry,
    verify_solution,
)
from dsgraph.duality import dualize_solution, gauss_map, gauss_map_inverse
from dsgraph.errors import BranchLossError, NonConvergenceError
from dsgraph.exactsol import Hyperboloid, cap_jet, fit_cap_to_disk
from dsgraph.oracle import RadialProblem, shoot

from runs import HARMONIC, SQRT3, SQUARE_EPS, disk_run, square_runs
from test_geometry import random_jets, richardson_fd

DISK_RESOLUTIONS = (32, 64, 128)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def cap_error(sol):
    cap = fit_cap_to_disk(SQRT3, 2.0, 0.1)
    return float(np.max(np.abs(sol.u - cap.height(sol.grid.coords))))


def test_criterion_01_umbilic_cap(report):
    worst = 0.0
    for n in (1, 2, 3):
        rng = np.random.default_rng(n)
        for sigma in (1.5, 2.0, 5.0):
            hyp = Hyperboloid(np.zeros(n), 1.0, sigma)
            d = rng.normal(size=(50, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            x = d * rng.uniform(0, 0.95 * hyp.footprint_radius, (50, 1))
            jets = cap_jet(hyp, x)
            for spec in curvfn.all_specs(n):
                val = geometry.eval_G(spec, jets)
                worst = max(worst, float(np.max(np.abs(val - sigma) / sigma)))
    ok = worst <= 1e-11
    assert report(1, ok, f"max relative |G - sigma| = {worst:.2e} (tol 1e-11)")


def test_criterion_02_eigenvalue_relation(report):
    worst = 0.0
    for n in (1, 2, 3, 4):
        jets = random_jets(np.random.default_rng(200 + n), n, 10_000)
        ev = geometry.eval_jet(jets)
        kappa = np.sort(ev.kappa, axis=1)
        pred = jets.u[:, None] * np.sort(ev.kappa_tilde, axis=1) + 1.0 / ev.w[:, None]
        worst = max(worst, float(np.max(np.abs(kappa - pred) / np.maximum(np.abs(kappa), 1e-300))))
    ok = worst <= 1e-10
    assert report(2, ok, f"max relative deviation = {worst:.2e} over 4 x 10^4 jets (tol 1e-10)")


def test_criterion_03_convexity_equivalence(report):
    agree = total = positives = 0
    for n in (1, 2, 3, 4):
        jets = random_jets(np.random.default_rng(300 + n), n, 10_000)
        ev = geometry.eval_jet(jets)
        a = np.linalg.eigvalsh(ev.a_desitter)[:, 0] > 0
        p = np.linalg.eigvalsh(ev.p_hessian)[:, 0] > 0
        agree += int(np.sum(a == p))
        total += len(a)
        positives += int(a.sum())
    ok = agree == total
    assert report(3, ok, f"agreement {agree}/{total} ({positives} positive-definite)")


def test_criterion_04_disk_solver_vs_cap(report):
    errs = [cap_error(disk_run(N)) for N in DISK_RESOLUTIONS]
    hs = [disk_run(N).grid.h for N in DISK_RESOLUTIONS]
    orders = [math.log(e0 / e1) / math.log(h0 / h1) for e0, e1, h0, h1 in zip(errs, errs[1:], hs, hs[1:])]
    ok = min(orders) >= 1.8 and errs[-1] <= 5e-4
    detail = "errors " + ", ".join(f"{e:.2e}" for e in errs) + "; orders " + ", ".join(f"{o:.2f}" for o in orders)
    assert report(4, ok, detail + " (need order >= 1.8, finest <= 5e-4)")


def test_criterion_05_annulus_vs_oracle(report):
    prob = Problem(HARMONIC, 2.0, 0.1, DomainSpec.annulus(1.0, 2.0), 64)
    try:
        sol = continuation_solve(prob)
    except NonConvergenceError as exc:
        assert report(5, False, f"2-D solve failed: {exc}")
    try:
        radial = shoot(RadialProblem(2, HARMONIC, 2.0, 0.1, 2.0, rho_inner=1.0))
    except BranchLossError as exc:
        assert report(5, False, f"radial shooter failed: {exc}")
    rho = np.hypot(*sol.grid.coords.T)
    diff = float(np.max(np.abs(sol.u - radial.interpolate(rho))))
    ok = diff <= 10 * sol.grid.h**2
    assert report(5, ok, f"sup difference {diff:.2e} = {diff / sol.grid.h**2:.2f} h^2 (tol 10 h^2)")


def test_criterion_06_boundary_angle(report):
    devs = [verify_solution(s.problem, s).boundary_angle_max_dev for s in square_runs()]
    ratios = [a / b for a, b in zip(devs, devs[1:])]
    ok = all(1.6 <= r <= 2.4 for r in ratios)
    detail = ("eps " + ", ".join(map(str, SQUARE_EPS)) + ": max |w - 1/sigma| "
              + ", ".join(f"{d:.4f}" for d in devs) + "; ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert report(6, ok, detail + " (need [1.6, 2.4])")


def test_criterion_07_maximum_principle(report):
    runs = [disk_run(N) for N in DISK_RESOLUTIONS] + list(square_runs())
    failures = []
    worst_margin = math.inf
    for sol in runs:
        loc = verify_solution(sol.problem, sol).max_principle_location
        margin = loc["interior_min"] - (loc["boundary_layer_min"] - loc["slack"])
        worst_margin = min(worst_margin, margin)
        if margin < 0:
            failures.append(f"{sol.grid.domain.kind} N={sol.grid.resolution} eps={sol.eps}")
    ok = not failures
    detail = f"{len(runs)} converged runs, smallest margin {worst_margin:.3e}"
    if failures:
        detail += "; violations: " + "; ".join(failures)
    assert report(7, ok, detail + " (annulus run of criterion 5 did not converge)")


def test_criterion_08_duality(report):
    rng = np.random.default_rng(8)
    roundtrip = 0.0
    for n in (1, 2, 3):
        jets = random_jets(rng, n, 10_000)
        x, u = gauss_map_inverse(*gauss_map(jets))
        roundtrip = max(roundtrip, float(np.max(np.abs(x - jets.x))), float(np.max(np.abs(u - jets.u) / jets.u)))
    _, rep = dualize_solution(disk_run(128), HARMONIC, 2.0, layers=2)
    prod, fdev = rep.interpolated_product_max_dev, rep.interpolated_f_star_max_dev
    ok = roundtrip <= 1e-10 and prod <= 5e-3 and fdev <= 5e-3
    detail = (f"round trip {roundtrip:.1e}; max |k*k - 1| {prod:.2e}; max |f*(k*) - 1/sigma| {fdev:.2e} "
              f"over {rep.interpolated_points} resampled points")
    assert report(8, ok, detail + " (tol 1e-10, 5e-3, 5e-3)")


def test_criterion_09_structure(report):
    bad = [str(spec) for n in range(1, 5) for spec in curvfn.all_specs(n)
           if not curvfn.check_structure(spec, 10_000, seed=9).all_ok]
    rng = np.random.default_rng(9)
    dual_dev = 0.0
    for n in range(1, 5):
        lam = rng.uniform(0.01, 100.0, (2000, n))
        for l in range(n):
            direct = curvfn.elem_sym(lam, n - l) ** (1.0 / (n - l))
            dual = curvfn.dual_eval(CurvatureSpec("quotient", l, n), lam)
            dual_dev = max(dual_dev, float(np.max(np.abs(dual - direct) / direct)))
    lim_dev = 0.0
    for n in range(2, 5):
        for l in range(1, n):
            r = curvfn.limit_at_infinity(CurvatureSpec("quotient", l, n), np.ones(n - 1), 1e8)
            lim_dev = max(lim_dev, abs(r.value - (n / l) ** (1.0 / (n - l))))
    ok = not bad and dual_dev <= 1e-12 and lim_dev <= 1e-6
    detail = (f"structure failures {bad or 'none'}; dual identity {dual_dev:.1e}; limit deviation {lim_dev:.1e}")
    assert report(9, ok, detail + " (tol 1e-12, 1e-6)")


def test_criterion_10_linearization(report):
    worst_fd = worst_trace = 0.0
    for n in (1, 2, 3):
        for spec in curvfn.all_specs(n):
            jets = random_jets(np.random.default_rng(1000 + 10 * n + spec.l), n, 100, admissible=True)
            for k in range(100):
                jet = jets[k]
                lin = geometry.linearize_G(spec, jet)
                fd = richardson_fd(spec, jet)
                scale = max(1.0, np.max(np.abs(lin.G_st)), np.max(np.abs(lin.G_s)), abs(lin.G_u))
                dev = max(np.max(np.abs(lin.G_st - fd[0])), np.max(np.abs(lin.G_s - fd[1])), abs(lin.G_u - fd[2]))
                worst_fd = max(worst_fd, dev / scale)
            lin = geometry.linearize_G(spec, jets)
            ev = geometry.eval_jet(jets)
            rhs = lin.value - curvfn.grad_f(spec, ev.kappa).sum(-1) / ev.w
            contraction = np.einsum("kst,kst->k", lin.G_st, jets.D2u)
            scale = np.maximum(1.0, np.abs(rhs))
            worst_trace = max(worst_trace, float(np.max(np.abs(contraction - rhs) / scale)),
                              float(np.max(np.abs(jets.u * lin.G_u - rhs) / scale)))
    ok = worst_fd <= 1e-6 and worst_trace <= 1e-8
    assert report(10, ok, f"max relative FD deviation {worst_fd:.1e}; trace identity {worst_trace:.1e} (tol 1e-6, 1e-8)")


def test_criterion_11_a_priori_trend(report):
    reps = [verify_solution(s.problem, s) for s in square_runs()]
    vals = [r.u_d2u_max for r in reps]
    variation = (max(vals) - min(vals)) / max(vals)
    kmin0, kmax0 = reps[0].kappa_range
    C = 2.0 * max(kmax0, 1.0 / kmin0)
    in_range = all(1.0 / C <= r.kappa_range[0] and r.kappa_range[1] <= C for r in reps)
    ok = variation < 0.2 and in_range
    detail = ("max u|D2u| " + ", ".join(f"{v:.2f}" for v in vals) + f" (variation {variation:.0%}, need < 20%); "
              "away from corners " + ", ".join(f"{r.u_d2u_max_smooth:.2f}" for r in reps)
              + "; kappa ranges " + ", ".join(f"[{a:.3f}, {b:.3f}]" for a, b in (r.kappa_range for r in reps))
              + f" within [1/C, C], C = {C:.3f}: {in_range}")
    assert report(11, ok, detail)
