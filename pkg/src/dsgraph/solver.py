"""Damped Newton with epsilon-continuation for ``G(D2u, Du, u) = sigma``, ``u = eps`` on the boundary."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import curvfn, geometry
from .curvfn import CurvatureSpec
from .domaingrid import DISK, INTERVAL, RECTANGLE, DomainSpec, Grid, build_grid, corner_zone, sphere_radii
from .errors import (
    ConfigError,
    InadmissibleError,
    NonConvergenceError,
    NotSpacelikeError,
    OutOfHalfspaceError,
    StallError,
)
from .exactsol import barrier_radii, fit_cap_to_disk

log = logging.getLogger(__name__)

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite_difference"

_GEOMETRY_ERRORS = (InadmissibleError, NotSpacelikeError, OutOfHalfspaceError)


@dataclass(frozen=True)
class Problem:
    spec: CurvatureSpec
    sigma: float
    eps: float
    domain: DomainSpec
    resolution: int

    def __post_init__(self):
        if not self.sigma > 1:
            raise ConfigError(f"sigma must satisfy sigma > 1, got {self.sigma}")
        if not self.eps > 0:
            raise ConfigError(f"boundary height must satisfy eps > 0, got {self.eps}")
        if self.spec.n != self.domain.dim:
            raise ConfigError(
                f"curvature dimension n={self.spec.n} does not match domain dimension {self.domain.dim}"
            )
        if int(self.resolution) != self.resolution or self.resolution < 8:
            raise ConfigError(f"resolution must be an integer >= 8, got {self.resolution}")

    def with_eps(self, eps):
        return Problem(self.spec, self.sigma, eps, self.domain, self.resolution)

    def with_sigma(self, sigma):
        return Problem(self.spec, sigma, self.eps, self.domain, self.resolution)


@dataclass
class SolverOptions:
    newton_tol: float = 1e-8
    max_newton_iters: int = 40
    damping_min: float = 2.0**-30
    eps_schedule: list | None = None
    jacobian_mode: str = ANALYTIC
    # fallback when the first stage fails from the seed: ramp sigma up from the plane u = eps
    sigma_continuation: bool = True
    sigma_steps: int = 8
    max_bisections: int = 8

    def schedule(self, problem):
        sched = list(self.eps_schedule) if self.eps_schedule else [problem.eps]
        validate_schedule(sched, problem.eps)
        return sched

    def __post_init__(self):
        if self.jacobian_mode not in (ANALYTIC, FINITE_DIFFERENCE):
            raise ConfigError(f"jacobian_mode must be {ANALYTIC!r} or {FINITE_DIFFERENCE!r}")
        if not self.newton_tol > 0 or self.max_newton_iters < 1 or not 0 < self.damping_min < 1:
            raise ConfigError("invalid Newton tolerances")


def validate_schedule(sched, eps):
    if not sched:
        raise ConfigError("eps_schedule is empty")
    if any(not e > 0 for e in sched):
        raise ConfigError("eps_schedule entries must be positive")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ConfigError("eps_schedule must be strictly decreasing")
    if not math.isclose(sched[-1], eps, rel_tol=0, abs_tol=1e-15):
        raise ConfigError(f"eps_schedule must end at eps={eps}, ends at {sched[-1]}")


@dataclass
class Solution:
    problem: Problem
    grid: Grid
    u: np.ndarray
    kappa_min: np.ndarray
    kappa_max: np.ndarray
    w: np.ndarray
    log: list
    converged: bool
    residual: float

    @property
    def eps(self):
        return self.problem.eps


def _grid_for(problem, grid=None):
    if grid is not None:
        return grid
    return build_grid(problem.domain, problem.resolution)


def _interior_eval(problem, grid, field, require_admissible=True):
    """Geometry at every interior node; geometry errors carry the global node id."""
    jets = grid.interior_jets(field)
    idx = grid.interior
    bad = np.flatnonzero(jets.u <= 0)
    if bad.size:
        raise OutOfHalfspaceError(f"non-positive height at node {idx[bad[0]]}")
    s = np.sum(jets.Du**2, axis=-1)
    bad = np.flatnonzero(s >= 1.0)
    if bad.size:
        raise NotSpacelikeError(f"|Du| >= 1 at node {idx[bad[0]]}", node=int(idx[bad[0]]))
    ev = geometry.eval_jet(jets)
    kmin = ev.kappa[:, 0]
    bad = np.flatnonzero(kmin <= 0)
    if bad.size and require_admissible:
        k = bad[np.argmin(kmin[bad])]
        raise InadmissibleError(
            f"inadmissible node {idx[k]}: min principal curvature {kmin[k]:.6g}",
            min_eig=float(kmin[k]),
            node=int(idx[k]),
        )
    return jets, ev


def residual(problem: Problem, field, grid: Grid | None = None):
    """``G - sigma`` at interior nodes, ``u - eps`` at boundary nodes."""
    grid = _grid_for(problem, grid)
    field = np.asarray(field, dtype=float)
    out = field - problem.eps
    jets, ev = _interior_eval(problem, grid, field)
    out[grid.interior] = curvfn.eval_f(problem.spec, ev.kappa) - problem.sigma
    return out


def _assemble_from_rows(grid, J_int):
    """Interior rows from ``J_int``, identity rows on the boundary, in node order."""
    N = grid.n_nodes
    P_int = sp.csr_matrix((np.ones(len(grid.interior)), (grid.interior, np.arange(len(grid.interior)))), shape=(N, len(grid.interior)))
    b = grid.boundary
    B = sp.csr_matrix((np.ones(len(b)), (b, b)), shape=(N, N))
    return (P_int @ J_int + B).tocsr()


def _analytic_jacobian(problem, grid, field):
    jets, ev = _interior_eval(problem, grid, field)
    lin = geometry.linearize_G(problem.spec, jets, ev)
    n = grid.dim
    idx = grid.interior
    N = grid.n_nodes
    J = sp.csr_matrix((lin.G_u, (np.arange(len(idx)), idx)), shape=(len(idx), N))
    for s in range(n):
        J = J + sp.diags(lin.G_s[:, s]) @ grid.d1[s]
        J = J + sp.diags(lin.G_st[:, s, s]) @ grid.d2[s][s]
        for t in range(s + 1, n):
            J = J + sp.diags(2.0 * lin.G_st[:, s, t]) @ grid.d2[s][t]
    return _assemble_from_rows(grid, J)


def _column_colors(pattern):
    """Greedy coloring so columns sharing a row get distinct colors."""
    pattern = sp.csc_matrix(pattern)
    rows_of = [pattern.indices[pattern.indptr[j]:pattern.indptr[j + 1]] for j in range(pattern.shape[1])]
    pr = sp.csr_matrix(pattern)
    colors = -np.ones(pattern.shape[1], int)
    for j in range(pattern.shape[1]):
        taken = set()
        for r in rows_of[j]:
            taken.update(colors[pr.indices[pr.indptr[r]:pr.indptr[r + 1]]].tolist())
        c = 0
        while c in taken:
            c += 1
        colors[j] = c
    return colors


def _stencil_pattern(grid):
    n = grid.dim
    S = abs(grid.d1[0])
    for s in range(n):
        S = S + abs(grid.d1[s])
        for t in range(s, n):
            S = S + abs(grid.d2[s][t])
    S = S + sp.csr_matrix((np.ones(len(grid.interior)), (np.arange(len(grid.interior)), grid.interior)), shape=S.shape)
    return _assemble_from_rows(grid, S)


def _fd_jacobian(problem, grid, field):
    """Central differences of the residual, one colour group of columns at a time."""
    field = np.asarray(field, dtype=float)
    pattern = _stencil_pattern(grid)
    colors = _column_colors(pattern)
    steps = 1e-6 * (1.0 + np.abs(field))
    pat = pattern.tocoo()
    vals = np.zeros(pat.nnz)
    for c in range(colors.max() + 1):
        cols = colors == c
        d = np.where(cols, steps, 0.0)
        diff = (residual(problem, field + d, grid) - residual(problem, field - d, grid)) / 2.0
        sel = cols[pat.col]
        vals[sel] = diff[pat.row[sel]] / steps[pat.col[sel]]
    return sp.csr_matrix((vals, (pat.row, pat.col)), shape=pattern.shape)


def assemble_jacobian(problem: Problem, field, grid: Grid | None = None, mode=ANALYTIC):
    grid = _grid_for(problem, grid)
    if mode == ANALYTIC:
        return _analytic_jacobian(problem, grid, field)
    if mode == FINITE_DIFFERENCE:
        return _fd_jacobian(problem, grid, field)
    raise ConfigError(f"unknown jacobian mode {mode!r}")


def _cap_profile(a, b, sigma, eps):
    """1-D lower cap over ``[a, b]`` with height ``eps`` at both ends."""
    cap = fit_cap_to_disk(0.5 * (b - a), sigma, eps, center=[0.5 * (a + b)], n=1)
    return lambda t: cap.height(np.asarray(t)[..., None])


def initial_guess(problem: Problem, grid: Grid | None = None):
    """Admissible seed taking exactly ``eps`` on the boundary.

    Disks and intervals get the fitted umbilic cap (the exact continuum
    solution). Rectangles get a smooth minimum of the two 1-D caps across
    the sides, which is concave with ``|Du| < 1`` and hence admissible.
    Annuli get the 1-D cap profile across the ring in the radial variable.
    """
    grid = _grid_for(problem, grid)
    dom, sigma, eps = problem.domain, problem.sigma, problem.eps
    X = grid.coords
    p = dom.params
    if dom.kind in (DISK, INTERVAL):
        cap = fit_cap_to_disk(dom.circumradius(), sigma, eps, center=dom.center(), n=dom.dim)
        u = cap.height(X)
    elif dom.kind == RECTANGLE:
        gx = _cap_profile(p[0], p[1], sigma, eps)(X[:, 0]) - eps
        gy = _cap_profile(p[2], p[3], sigma, eps)(X[:, 1]) - eps
        q = 4.0
        with np.errstate(divide="ignore"):
            m = (np.maximum(gx, 0) ** -q + np.maximum(gy, 0) ** -q) ** (-1.0 / q)
        u = eps + np.nan_to_num(m, nan=0.0, posinf=0.0)
    else:
        rho = np.hypot(X[:, 0] - p[0], X[:, 1] - p[1])
        u = _cap_profile(p[2], p[3], sigma, eps)(rho)
    u = np.asarray(u, dtype=float)
    u[grid.boundary] = eps
    return u


def _solve_linear(J, rhs):
    return spla.splu(J.tocsc()).solve(rhs)


def newton_solve(problem: Problem, options: SolverOptions, start, grid: Grid | None = None) -> Solution:
    """Damped Newton from an admissible ``start`` field."""
    grid = _grid_for(problem, grid)
    u = np.asarray(start, dtype=float).copy()
    try:
        r = residual(problem, u, grid)
    except _GEOMETRY_ERRORS as exc:
        raise InadmissibleError(f"start field not admissible: {exc}") from exc
    norm = float(np.max(np.abs(r)))
    history = [{"eps": problem.eps, "sigma": problem.sigma, "iter": 0, "residual": norm, "step": 0.0}]
    it = 0
    while norm > options.newton_tol:
        if it >= options.max_newton_iters:
            raise NonConvergenceError(
                f"Newton did not converge in {it} iterations (residual {norm:.3e})", residual=norm, eps=problem.eps
            )
        it += 1
        J = assemble_jacobian(problem, u, grid, options.jacobian_mode)
        delta = _solve_linear(J, -r)
        t = 1.0
        while True:
            trial = u + t * delta
            try:
                r_t = residual(problem, trial, grid)
                norm_t = float(np.max(np.abs(r_t)))
                if norm_t <= (1.0 - t / 4.0) * norm:
                    break
            except _GEOMETRY_ERRORS:
                pass
            t *= 0.5
            if t < options.damping_min:
                raise StallError(
                    f"line search stalled at eps={problem.eps} (residual {norm:.3e})", residual=norm, eps=problem.eps
                )
        u, r, norm = trial, r_t, norm_t
        history.append({"eps": problem.eps, "sigma": problem.sigma, "iter": it, "residual": norm, "step": t})
        log.debug("eps=%g iter=%d residual=%.3e step=%g", problem.eps, it, norm, t)
    return _make_solution(problem, grid, u, history, norm)


def _make_solution(problem, grid, u, history, norm):
    _, ev = _interior_eval(problem, grid, u)
    return Solution(
        problem=problem,
        grid=grid,
        u=u,
        kappa_min=ev.kappa[:, 0].copy(),
        kappa_max=ev.kappa[:, -1].copy(),
        w=ev.w.copy(),
        log=history,
        converged=True,
        residual=norm,
    )


def _shift_to_eps(u, grid, eps_old, eps_new):
    """Lower the whole graph by the change in boundary height, then reset the boundary."""
    v = u - (eps_old - eps_new)
    v[grid.boundary] = eps_new
    return v


def _sigma_ramp(problem, options, grid):
    """Continuation in sigma from the exact plane solution ``u = eps`` at ``sigma = 1``."""
    u = np.full(grid.n_nodes, problem.eps)
    history = []
    K = options.sigma_steps
    for k in range(1, K + 1):
        sig = 1.0 + (problem.sigma - 1.0) * k / K
        sol = newton_solve(problem.with_sigma(sig), options, u, grid)
        history += sol.log
        u = sol.u
    sol.log = history
    return sol


def continuation_solve(problem: Problem, options: SolverOptions | None = None, grid: Grid | None = None) -> Solution:
    """Solve along a decreasing schedule of boundary heights.

    Each stage starts from the previous solution lowered to the new height.
    A failed stage inserts the geometric mean of the failing height and the
    last success and retries, at most ``options.max_bisections`` times.
    """
    options = options or SolverOptions()
    grid = _grid_for(problem, grid)
    pending = options.schedule(problem)
    history = []

    first = problem.with_eps(pending.pop(0))
    try:
        sol = newton_solve(first, options, initial_guess(first, grid), grid)
    except (NonConvergenceError, InadmissibleError) as exc:
        if not options.sigma_continuation:
            raise
        log.info("seed failed at eps=%g (%s); falling back to sigma continuation", first.eps, exc)
        sol = _sigma_ramp(first, options, grid)
    history += sol.log

    bisections = 0
    while pending:
        eps = pending[0]
        stage = problem.with_eps(eps)
        try:
            start = _shift_to_eps(sol.u, grid, sol.eps, eps)
            nxt = newton_solve(stage, options, start, grid)
        except (NonConvergenceError, InadmissibleError) as exc:
            bisections += 1
            if bisections > options.max_bisections:
                raise NonConvergenceError(
                    f"continuation exhausted bisections; smallest eps reached {sol.eps}",
                    residual=getattr(exc, "residual", None),
                    eps=sol.eps,
                ) from exc
            mid = math.sqrt(eps * sol.eps)
            log.info("stage eps=%g failed; inserting eps=%g", eps, mid)
            pending.insert(0, mid)
            continue
        pending.pop(0)
        sol = nxt
        history += sol.log
    sol.log = history
    return sol


@dataclass
class VerificationReport:
    boundary_angle_max_dev: float
    max_principle_location: dict
    u_d2u_max: float
    # same maximum away from rectangle corners (quarter of the short side)
    u_d2u_max_smooth: float
    kappa_range: tuple
    duality_curvature_range: tuple
    max_grad: float
    angle_bounds: dict
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["kappa_range"] = list(self.kappa_range)
        d["duality_curvature_range"] = list(self.duality_curvature_range)
        return d


def boundary_weights(solution: Solution):
    """``(node ids, w)`` on smooth boundary nodes from one-sided normal derivatives.

    The field is constant along the boundary, so ``|Du|`` is the normal
    derivative there.
    """
    grid = solution.grid
    dn = grid.dn @ solution.u
    return grid.boundary_rows, np.sqrt(np.clip(1.0 - dn**2, 0.0, None))


def angle_quotient(sigma, w, u):
    """``(sigma - nu^{n+1}) / u`` with ``nu^{n+1} = 1 / w``."""
    return (sigma - 1.0 / w) / u


def _near_corner(grid, x):
    if grid.domain.kind != RECTANGLE:
        return np.zeros(len(x), bool)
    x0, x1, y0, y1 = grid.domain.params
    reach = 0.25 * min(x1 - x0, y1 - y0)
    dx = np.minimum(x[:, 0] - x0, x1 - x[:, 0])
    dy = np.minimum(x[:, 1] - y0, y1 - x[:, 1])
    return np.maximum(dx, dy) < reach


def _degenerate_report(reason, converged):
    nan = math.nan
    return VerificationReport(
        boundary_angle_max_dev=nan,
        max_principle_location={"error": reason},
        u_d2u_max=nan,
        u_d2u_max_smooth=nan,
        kappa_range=(nan, nan),
        duality_curvature_range=(nan, nan),
        max_grad=nan,
        angle_bounds={"error": reason},
        checks={
            "converged": bool(converged),
            "admissible": False,
            "spacelike_gradient_bound": False,
            "max_principle": False,
            "boundary_angle_bounds": False,
        },
    )


def verify_solution(problem: Problem, solution: Solution, corner_cells=1) -> VerificationReport:
    """Check the a priori estimates on a converged solution; violations are reported, not raised.

    On rectangles the nodes of the ``corner_cells`` x ``corner_cells`` block
    at each corner are left out of the angle and maximum-principle statistics.
    """
    if not solution.converged:
        raise ValueError("verification requires a converged solution")
    grid, u, sigma, eps = solution.grid, solution.u, problem.sigma, problem.eps
    try:
        jets, ev = _interior_eval(problem, grid, u, require_admissible=False)
    except (OutOfHalfspaceError, NotSpacelikeError) as exc:
        return _degenerate_report(str(exc), solution.converged)
    excluded = corner_zone(grid, corner_cells)
    b_ids, w_b = boundary_weights(solution)
    keep_b = ~excluded[b_ids]
    b_ids, w_b = b_ids[keep_b], w_b[keep_b]
    q_int_all = angle_quotient(sigma, ev.w, jets.u)
    keep_i = ~excluded[grid.interior]
    int_ids, q_int = grid.interior[keep_i], q_int_all[keep_i]
    q_b = angle_quotient(sigma, w_b, u[b_ids])

    h = grid.h
    all_ids = np.concatenate([int_ids, b_ids])
    all_q = np.concatenate([q_int, q_b])
    k = int(np.argmin(all_q))
    node = int(all_ids[k])
    dist = float(grid.domain.distance_to_boundary(grid.coords[node])[0])
    layer = np.isin(int_ids, grid.layer1)
    layer_min = min(float(np.min(q_b)), float(np.min(q_int[layer])) if layer.any() else math.inf)
    deep = q_int[~layer]
    deep_min = float(np.min(deep)) if deep.size else math.inf
    slack = 10.0 * h**2
    mp_ok = deep_min >= layer_min - slack

    # largest |eigenvalue| of the Hessian
    d2_norm = np.max(np.abs(np.linalg.eigvalsh(jets.D2u)), axis=-1)
    u_d2u_all = jets.u * d2_norm
    u_d2u = float(np.max(u_d2u_all))
    far = ~_near_corner(grid, grid.coords[grid.interior])
    u_d2u_smooth = float(np.max(u_d2u_all[far])) if far.any() else math.nan
    max_grad = float(np.sqrt(np.max(np.sum(jets.Du**2, axis=-1))))
    kr = (float(np.min(ev.kappa)), float(np.max(ev.kappa)))
    dual_range = (1.0 / kr[1], 1.0 / kr[0])

    radii = sphere_radii(grid.domain)
    try:
        br = barrier_radii(radii["r1"], radii["r2"], sigma, eps)
        within = bool(np.all((q_b > br.angle_low - slack) & (q_b < br.angle_high + slack)))
        nu_lo, nu_hi = br.nu_bounds(eps, sigma)
        nu_b = 1.0 / w_b
        angle = {
            "angle_low": br.angle_low,
            "angle_high": br.angle_high,
            "measured_min": float(np.min(q_b)),
            "measured_max": float(np.max(q_b)),
            "within_bounds": within,
            "nu_bound_low": nu_lo,
            "nu_bound_high": nu_hi if math.isfinite(nu_hi) else None,
            "nu_slack_low": float(np.min(nu_b - nu_lo)),
            "nu_slack_high": float(np.min(nu_hi - nu_b)) if math.isfinite(nu_hi) else None,
        }
    except ValueError as exc:
        within = True
        angle = {"error": str(exc)}

    checks = {
        "converged": bool(solution.converged),
        "admissible": bool(np.all(ev.kappa[:, 0] > 0)),
        "spacelike_gradient_bound": max_grad < 1.0,
        "max_principle": bool(mp_ok),
        "boundary_angle_bounds": within,
    }
    return VerificationReport(
        boundary_angle_max_dev=float(np.max(np.abs(w_b - 1.0 / sigma))),
        max_principle_location={
            "node": node,
            "x": [float(c) for c in grid.coords[node]],
            "distance_to_boundary": dist,
            "min_value": float(all_q[k]),
            "boundary_layer_min": layer_min,
            "interior_min": deep_min,
            "slack": slack,
            "excluded_nodes": int(excluded.sum()),
        },
        u_d2u_max=u_d2u,
        u_d2u_max_smooth=u_d2u_smooth,
        kappa_range=kr,
        duality_curvature_range=dual_range,
        max_grad=max_grad,
        angle_bounds=angle,
        checks=checks,
    )
