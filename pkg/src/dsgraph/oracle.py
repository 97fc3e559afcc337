"""Radial shooting oracle for rotationally symmetric solutions on disks and annuli."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import curvfn
from .curvfn import CurvatureSpec
from .errors import BranchLossError, ConfigError, NonConvergenceError, NotSpacelikeError

# integration tolerances; mesh refinement check uses these divided by 32
RTOL = 1e-11
ATOL = 1e-13


@dataclass(frozen=True)
class RadialProblem:
    n: int
    spec: CurvatureSpec
    sigma: float
    eps: float
    rho_outer: float
    rho_inner: float | None = None

    def __post_init__(self):
        if not self.sigma > 1:
            raise ConfigError(f"sigma must satisfy sigma > 1, got {self.sigma}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.spec.n != self.n:
            raise ConfigError("curvature spec dimension does not match n")
        if self.rho_inner is not None and not 0 < self.rho_inner < self.rho_outer:
            raise ConfigError("annulus requires 0 < rho_inner < rho_outer")


@dataclass
class RadialSolution:
    rho: np.ndarray
    u: np.ndarray
    du: np.ndarray
    mismatch: float
    refinement_change: float
    shooting_parameter: float
    problem: RadialProblem

    def curvatures(self):
        d2 = np.array(
            [radial_rhs(self.problem.spec, self.problem.sigma, r, a, b) for r, a, b in zip(self.rho, self.u, self.du)]
        )
        return radial_curvatures(self.rho, self.u, self.du, d2)

    def interpolate(self, rho):
        from scipy.interpolate import CubicHermiteSpline

        return CubicHermiteSpline(self.rho, self.u, self.du)(rho)


def radial_curvatures(rho, u, du, d2u):
    """Radial and tangential de Sitter curvatures of a rotationally symmetric graph.

    The tangential one has multiplicity ``n - 1``. At ``rho = 0`` the
    symmetric limit ``kappa_t = kappa_r`` is used.
    """
    rho, u, du, d2u = (np.asarray(a, dtype=float) for a in (rho, u, du, d2u))
    if np.any(du**2 >= 1):
        raise NotSpacelikeError("|u'| >= 1")
    w = np.sqrt(1.0 - du**2)
    kt_r = -d2u / w**3
    with np.errstate(divide="ignore", invalid="ignore"):
        kt_t = np.where(rho > 0, -du / (np.where(rho > 0, rho, 1.0) * w), -d2u / w)
    return u * kt_r + 1.0 / w, u * kt_t + 1.0 / w


def _f_split(spec, kr, kt):
    lam = np.full(spec.n, kt)
    lam[0] = kr
    return float(curvfn.eval_f(spec, lam))


def radial_rhs(spec: CurvatureSpec, sigma, rho, u, du):
    """``u''`` solving ``f(kappa_r, kappa_t, ..., kappa_t) = sigma``.

    ``f`` increases in ``kappa_r`` and ``kappa_r`` decreases linearly in
    ``u''``, so the admissible root is unique; it is bracketed in
    ``kappa_r`` and the bracket grown geometrically.
    """
    if du * du >= 1:
        raise NotSpacelikeError("|u'| >= 1")
    w = math.sqrt(1.0 - du * du)
    if rho == 0:
        # umbilic apex: every curvature equals sigma
        return (1.0 / w - sigma) * w**3 / u
    kt = u * (-du / (rho * w)) + 1.0 / w
    if spec.n > 1 and kt <= 0:
        raise BranchLossError(f"tangential curvature {kt:.3g} left the positive cone at rho={rho:.6g}")

    def g(kr):
        return _f_split(spec, kr, kt) - sigma

    lo = 1e-12 * max(1.0, abs(kt))
    if g(lo) > 0:
        raise BranchLossError(f"no admissible radial curvature at rho={rho:.6g}")
    hi = max(2.0 * sigma, 1.0)
    for _ in range(60):
        if g(hi) > 0:
            break
        hi *= 2.0
    else:
        raise BranchLossError(f"radial curvature root not bracketed at rho={rho:.6g}")
    kr = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return (1.0 / w - kr) * w**3 / u


def _integrate(problem, rho0, y0, rho1, rtol, atol, max_step=np.inf, t_eval=None):
    spec, sigma = problem.spec, problem.sigma

    def rhs(r, y):
        try:
            return [y[1], radial_rhs(spec, sigma, r, y[0], y[1])]
        except NotSpacelikeError as exc:
            raise BranchLossError(f"lightlike slope at rho={r:.6g}") from exc

    def hit_zero(r, y):
        return y[0]

    def hit_light(r, y):
        return 1.0 - abs(y[1]) - 1e-9

    hit_zero.terminal = hit_light.terminal = True
    sol = solve_ivp(
        rhs, (rho0, rho1), y0, method="RK45", rtol=rtol, atol=atol, max_step=max_step,
        events=(hit_zero, hit_light), t_eval=t_eval, dense_output=True,
    )
    if sol.status == 1:
        kind = "zero" if sol.t_events[0].size else "lightlike"
        exc = BranchLossError(f"integration hit the {kind} barrier near rho={sol.t[-1]:.6g}")
        exc.kind = kind
        raise exc
    if not sol.success:
        raise BranchLossError(sol.message)
    return sol


def _disk_end(problem, u0, rtol=RTOL, atol=ATOL, t_eval=None, max_step=np.inf):
    """Series start over ``[0, h0]`` then integrate to the rim."""
    h0 = 1e-4 * problem.rho_outer
    c = radial_rhs(problem.spec, problem.sigma, 0.0, u0, 0.0)
    y0 = [u0 + 0.5 * c * h0**2, c * h0]
    return _integrate(problem, h0, y0, problem.rho_outer, rtol, atol, max_step, t_eval)


def _annulus_end(problem, slope, rtol=RTOL, atol=ATOL, t_eval=None, max_step=np.inf):
    return _integrate(problem, problem.rho_inner, [problem.eps, slope], problem.rho_outer, rtol, atol, max_step, t_eval)


def _secant(fun, x0, x1, tol, max_iter=60):
    f0, f1 = fun(x0), fun(x1)
    for _ in range(max_iter):
        if abs(f1) <= tol:
            return x1, f1
        if f1 == f0:
            break
        x0, x1, f0 = x1, x1 - f1 * (x1 - x0) / (f1 - f0), f1
        f1 = fun(x1)
    raise NonConvergenceError(f"secant iteration diverged (mismatch {f1:.3e})", residual=abs(f1))


def shoot(problem: RadialProblem, n_out=2001, tol=1e-10) -> RadialSolution:
    """Shoot from the apex (disk) or the inner rim (annulus) until ``u(rho_outer) = eps``."""
    R = problem.rho_outer
    if problem.rho_inner is None:
        # seed from the umbilic cap through (R, eps): exact for every f
        k = problem.sigma**2 - 1.0
        r = (problem.sigma * problem.eps + math.sqrt(problem.eps**2 + k * R**2)) / k
        guess = r * (problem.sigma - 1.0)

        def miss(u0):
            return _disk_end(problem, u0).y[0, -1] - problem.eps

        param, _ = _secant(miss, guess, guess * (1 + 1e-3), tol)
        grid = np.linspace(1e-4 * R, R, n_out)
        end = lambda **kw: _disk_end(problem, param, **kw)
    else:
        a = problem.rho_inner
        param = _annulus_slope(problem, tol)
        grid = np.linspace(a, R, n_out)
        end = lambda **kw: _annulus_end(problem, param, **kw)

    coarse = end(t_eval=grid)
    fine = end(rtol=RTOL / 32, atol=ATOL / 32, t_eval=grid)
    change = float(np.max(np.abs(fine.y[0] - coarse.y[0])))
    mismatch = float(fine.y[0, -1] - problem.eps)
    rho, u, du = fine.t, fine.y[0], fine.y[1]
    if problem.rho_inner is None:
        # prepend the apex from the series start
        rho = np.concatenate([[0.0], rho])
        u = np.concatenate([[param], u])
        du = np.concatenate([[0.0], du])
    return RadialSolution(rho, u, du, mismatch, change, param, problem)


def _annulus_slope(problem, tol):
    """Shooting slope at the inner rim.

    The miss function is only defined on an interval of slopes (too steep
    and the graph turns lightlike, too flat and it falls below zero), so a
    coarse scan locates a sign change before refining with Brent's method.
    """
    eps = problem.eps

    def miss(s):
        try:
            return _annulus_end(problem, s, rtol=1e-9, atol=1e-11).y[0, -1] - eps
        except BranchLossError as exc:
            # falling through u = 0 before the outer rim undershoots the target
            return -eps if getattr(exc, "kind", None) == "zero" else None

    slopes = np.linspace(1e-3, 1 - 1e-6, 60)
    vals = [miss(s) for s in slopes]
    bracket = None
    for (s0, v0), (s1, v1) in zip(zip(slopes, vals), zip(slopes[1:], vals[1:])):
        if v0 is not None and v1 is not None and v0 * v1 <= 0:
            bracket = (s0, s1)
            break
    if bracket is None:
        raise BranchLossError("no radial solution found: shooting miss never changes sign")

    def miss_fine(s):
        try:
            return _annulus_end(problem, s).y[0, -1] - eps
        except BranchLossError as exc:
            if getattr(exc, "kind", None) == "zero":
                return -eps
            raise

    s = brentq(miss_fine, *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(miss_fine(s)) > tol:
        raise NonConvergenceError("annulus shooting did not reach the boundary tolerance")
    return s
