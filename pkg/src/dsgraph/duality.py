"""Gauss map duality between spacelike de Sitter graphs and convex hyperbolic graphs.

A point ``(x, u)`` with gradient ``Du`` maps to ``(y, v)`` with
``y = x - u Du`` and ``v = u w``. The image graph ``v(y)`` in the hyperbolic
half space has principal curvatures ``1 / kappa_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import ndimage
from scipy.interpolate import LinearNDInterpolator, RBFInterpolator
from scipy.spatial import ConvexHull, cKDTree

from . import curvfn, geometry
from .curvfn import CurvatureSpec
from .errors import InadmissibleError, OutOfHalfspaceError
from .geometry import PointJet


def gauss_map(jet: PointJet):
    """``(y, v, grad_v)``; batched like the jet."""
    w = geometry.gradient_weight(jet.Du)
    u = jet.u[..., None]
    y = jet.x - u * jet.Du
    v = jet.u * w
    grad_v = jet.Du / w[..., None]
    return y, v, grad_v


def gauss_map_inverse(y, v, grad_v):
    """``(x, u)`` with ``x = y + v grad_v`` and ``u = v sqrt(1 + |grad_v|^2)``."""
    y, v, grad_v = (np.asarray(a, dtype=float) for a in (y, v, grad_v))
    if np.any(v <= 0):
        raise OutOfHalfspaceError("dual height must be positive")
    x = y + v[..., None] * grad_v
    u = v * np.sqrt(1.0 + np.sum(grad_v**2, axis=-1))
    return x, u


@dataclass
class LegendrePair:
    p: np.ndarray
    q: np.ndarray
    defect: np.ndarray


def legendre_pair(jet: PointJet) -> LegendrePair:
    """``p = (|x|^2 - u^2)/2``, ``q = (|y|^2 + v^2)/2``; ``p + q - x.y`` vanishes identically."""
    y, v, _ = gauss_map(jet)
    x = jet.x
    p = 0.5 * (np.sum(x**2, axis=-1) - jet.u**2)
    q = 0.5 * (np.sum(y**2, axis=-1) + v**2)
    return LegendrePair(p=p, q=q, defect=p + q - np.sum(x * y, axis=-1))


def hyperbolic_curvatures(v, grad_v, hess_v):
    """Principal curvatures of the graph ``v(y)`` in the hyperbolic half space.

    Eigenvalues of the pencil ``(h*, g*)`` with ``g* = (I + Dv Dv^T) / v^2``
    and ``h* = (I + v D2v + Dv Dv^T) / (v^2 sqrt(1 + |Dv|^2))``, ascending.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    grad_v = np.asarray(grad_v, dtype=float).reshape(v.shape + (-1,))
    hess_v = np.asarray(hess_v, dtype=float).reshape(grad_v.shape + (grad_v.shape[-1],))
    n = grad_v.shape[-1]
    out = np.empty(grad_v.shape)
    for k in range(v.shape[0]):
        vv, p, M = v[k], grad_v[k], hess_v[k]
        pp = np.outer(p, p)
        g = (np.eye(n) + pp) / vv**2
        h = (np.eye(n) + vv * 0.5 * (M + M.T) + pp) / (vv**2 * np.sqrt(1.0 + p @ p))
        out[k] = scipy.linalg.eigh(h, g, eigvals_only=True)
    return out


@dataclass
class DualGraph:
    y: np.ndarray
    v: np.ndarray
    # reciprocal curvatures at each mapped node, ascending
    kappa_star: np.ndarray
    # vertices of the convex hull of the y points, counter-clockwise (2-D) or endpoints (1-D)
    hull: np.ndarray
    node_ids: np.ndarray

    def to_rows(self):
        for i, y, v, k in zip(self.node_ids, self.y, self.v, self.kappa_star):
            yield int(i), [float(c) for c in y], float(v), [float(c) for c in k]


@dataclass
class DualityReport:
    target: float
    reciprocal_f_star_max_dev: float
    interpolated_f_star_max_dev: float
    interpolated_product_max_dev: float
    interpolated_points: int
    legendre_defect_max: float
    roundtrip_max_error: float
    injective: bool
    p_hessian_min_eig: float
    kappa_star_positive: bool
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())


def _hull(y):
    if y.shape[1] == 1:
        return np.array([[y.min()], [y.max()]])
    return y[ConvexHull(y).vertices]


def _regular_resample(y, v, spacing, layers, neighbors):
    """Interpolate scattered ``v(y)`` to a regular grid; returns the grid and a mask of trusted nodes.

    A node is covered when a mapped point lies within one spacing of it; the
    covered set is eroded by ``layers`` so that only stencils with
    two-sided support are kept.
    """
    d = y.shape[1]
    lo, hi = y.min(axis=0), y.max(axis=0)
    axes = [np.arange(lo[k], hi[k] + 0.5 * spacing, spacing) for k in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, d)
    dist, _ = cKDTree(y).query(flat)
    covered = (dist <= spacing).reshape(mesh.shape[:-1])
    trusted = ndimage.binary_erosion(covered, iterations=layers, border_value=0)
    vals = np.full(flat.shape[0], np.nan)
    need = ndimage.binary_dilation(trusted, iterations=1).ravel() & covered.ravel()
    # thin to about one point per half cell; polar grids crowd the axis onto
    # tiny rings, on which a local quadratic fit is degenerate
    _, keep = np.unique(np.floor((y - lo) / (0.5 * spacing)).astype(np.int64), axis=0, return_index=True)
    keep = np.sort(keep)
    interp = RBFInterpolator(y[keep], v[keep], neighbors=neighbors, kernel="quintic", degree=2)
    vals[need] = interp(flat[need])
    return mesh, vals.reshape(mesh.shape[:-1]), trusted


def _central_jet(vals, spacing, idx):
    """Value, gradient and Hessian of a regular-grid field by central differences."""
    d = vals.ndim
    H = spacing
    v0 = vals[idx]
    grad = np.empty(d)
    hess = np.empty((d, d))
    unit = np.eye(d, dtype=int)
    for a in range(d):
        ip, im = tuple(np.add(idx, unit[a])), tuple(np.subtract(idx, unit[a]))
        grad[a] = (vals[ip] - vals[im]) / (2 * H)
        hess[a, a] = (vals[ip] - 2 * v0 + vals[im]) / H**2
        for b in range(a + 1, d):
            s = lambda i, j: vals[tuple(np.add(np.add(idx, i * unit[a]), j * unit[b]))]
            hess[a, b] = hess[b, a] = (s(1, 1) - s(1, -1) - s(-1, 1) + s(-1, -1)) / (4 * H * H)
    return v0, grad, hess


def dualize_solution(solution, spec: CurvatureSpec, sigma, layers=2, neighbors=40, spacing=None):
    """Map a converged solution to its dual graph and check the dual equation.

    The reciprocal curvatures give ``f*(1/kappa) = 1/f(kappa)`` exactly; the
    reported interpolated check recomputes ``kappa*`` from a resampled ``v``
    and the hyperbolic second fundamental form, independent of the primal
    eigen-solver.
    """
    grid, u = solution.grid, solution.u
    ids = grid.interior
    jets = grid.interior_jets(u)
    ev = geometry.eval_jet(jets)
    if not np.all(geometry.is_admissible(ev)):
        bad = int(ids[np.flatnonzero(~geometry.is_admissible(ev))[0]])
        raise InadmissibleError(
            f"node {bad} is not admissible", min_eig=float(np.min(ev.kappa[:, 0])), node=bad
        )
    y, v, grad_v = gauss_map(jets)
    kappa_star = np.sort(1.0 / ev.kappa, axis=-1)
    target = 1.0 / sigma
    f_star = curvfn.dual_eval(spec, kappa_star)
    reciprocal_dev = float(np.max(np.abs(f_star - target)))

    x_back, u_back = gauss_map_inverse(y, v, grad_v)
    roundtrip = float(max(np.max(np.abs(x_back - jets.x)), np.max(np.abs(u_back - jets.u) / jets.u)))
    leg = legendre_pair(jets)
    scale = 1.0 + np.abs(np.sum(jets.x * y, axis=-1))
    legendre_defect = float(np.max(np.abs(leg.defect) / scale))
    p_min = float(np.min(np.linalg.eigvalsh(ev.p_hessian)))
    nn, _ = cKDTree(y).query(y, k=2)
    injective = bool(np.min(nn[:, 1]) > 0.0)

    # independent check on a regular resampling of v(y)
    spacing = grid.h if spacing is None else spacing
    mesh, vals, trusted = _regular_resample(y, v, spacing, layers, neighbors)
    if jets.x.shape[1] > 1:
        kappa_at = LinearNDInterpolator(jets.x, ev.kappa)
    else:
        order = np.argsort(jets.x[:, 0])
        xs, ks_primal = jets.x[order, 0], ev.kappa[order]

        def kappa_at(pts):
            return np.stack([np.interp(pts[:, 0], xs, ks_primal[:, j], left=np.nan, right=np.nan)
                             for j in range(ks_primal.shape[1])], axis=-1)
    f_dev, prod_dev, count = 0.0, 0.0, 0
    for idx in zip(*np.nonzero(trusted)):
        v0, gv, hv = _central_jet(vals, spacing, idx)
        if not np.all(np.isfinite(hv)) or v0 <= 0:
            continue
        ks = hyperbolic_curvatures(v0, gv, hv)[0]
        count += 1
        if ks[0] <= 0:
            f_dev = prod_dev = np.inf
            continue
        f_dev = max(f_dev, abs(float(curvfn.dual_eval(spec, ks)) - target))
        xb, _ = gauss_map_inverse(mesh[idx], v0, gv)
        k_primal = kappa_at(xb[None, :])[0]
        if np.all(np.isfinite(k_primal)):
            prod_dev = max(prod_dev, float(np.max(np.abs(ks * k_primal[::-1] - 1.0))))

    report = DualityReport(
        target=target,
        reciprocal_f_star_max_dev=reciprocal_dev,
        interpolated_f_star_max_dev=f_dev,
        interpolated_product_max_dev=prod_dev,
        interpolated_points=count,
        legendre_defect_max=legendre_defect,
        roundtrip_max_error=roundtrip,
        injective=injective,
        p_hessian_min_eig=p_min,
        kappa_star_positive=bool(np.all(kappa_star > 0)),
    )
    report.checks = {
        "dual_equation": reciprocal_dev <= 5e-3,
        "interpolated_dual_equation": count > 0 and f_dev <= 5e-3,
        "reciprocal_curvatures": count > 0 and prod_dev <= 5e-3,
        "injective_hodograph": injective and p_min > 0,
        "roundtrip": roundtrip <= 1e-10,
        "legendre_identity": legendre_defect <= 1e-12,
        "dual_convex": report.kappa_star_positive and bool(np.all(v > 0)),
    }
    dual = DualGraph(y=y, v=v, kappa_star=kappa_star, hull=_hull(y), node_ids=ids)
    return dual, report
