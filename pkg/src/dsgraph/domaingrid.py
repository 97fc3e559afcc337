"""Boundary-fitted grids and finite-difference jets.

Derivative stencils are assembled once per grid as sparse matrices acting on
the full nodal field, so that ``Du`` and ``D2u`` at every interior node are
plain sparse mat-vecs. Polar grids fold the exact chain rule into those
matrices, which keeps the solver's Jacobian assembly identical for all kinds.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .geometry import PointJet

INTERVAL = "interval"
RECTANGLE = "rectangle"
DISK = "disk"
ANNULUS = "annulus"
KINDS = (INTERVAL, RECTANGLE, DISK, ANNULUS)

CSV_COLUMNS = ("node_id", "x1", "x2", "is_boundary", "value")


@dataclass(frozen=True)
class DomainSpec:
    """A planar (or 1-D) domain.

    ``params`` per kind:

    * interval: ``(a, b)``
    * rectangle: ``(x0, x1, y0, y1)``
    * disk: ``(cx, cy, radius)``
    * annulus: ``(cx, cy, r_inner, r_outer)``
    """

    kind: str
    params: tuple

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        p = self.params
        expected = {INTERVAL: 2, RECTANGLE: 4, DISK: 3, ANNULUS: 4}
        if kind not in expected:
            raise ConfigError(f"unknown domain kind {self.kind!r}; expected one of {KINDS}")
        if len(p) != expected[kind]:
            raise ConfigError(f"{kind} takes {expected[kind]} parameters, got {len(p)}")
        if kind == INTERVAL and not p[1] > p[0]:
            raise ConfigError("interval requires a < b")
        if kind == RECTANGLE and not (p[1] > p[0] and p[3] > p[2]):
            raise ConfigError("rectangle requires x0 < x1 and y0 < y1")
        if kind == DISK and not p[2] > 0:
            raise ConfigError("disk radius must be positive")
        if kind == ANNULUS and not 0 < p[2] < p[3]:
            raise ConfigError("annulus requires 0 < r_inner < r_outer")

    @property
    def dim(self):
        return 1 if self.kind == INTERVAL else 2

    @classmethod
    def interval(cls, a, b):
        return cls(INTERVAL, (a, b))

    @classmethod
    def rectangle(cls, x0, x1, y0, y1):
        return cls(RECTANGLE, (x0, x1, y0, y1))

    @classmethod
    def disk(cls, radius, center=(0.0, 0.0)):
        return cls(DISK, (center[0], center[1], radius))

    @classmethod
    def annulus(cls, r_inner, r_outer, center=(0.0, 0.0)):
        return cls(ANNULUS, (center[0], center[1], r_inner, r_outer))

    def center(self):
        p = self.params
        if self.kind == INTERVAL:
            return np.array([0.5 * (p[0] + p[1])])
        if self.kind == RECTANGLE:
            return np.array([0.5 * (p[0] + p[1]), 0.5 * (p[2] + p[3])])
        return np.array(p[:2])

    def circumradius(self):
        """Radius of the smallest disk about :meth:`center` containing the domain."""
        p = self.params
        if self.kind == INTERVAL:
            return 0.5 * (p[1] - p[0])
        if self.kind == RECTANGLE:
            return 0.5 * math.hypot(p[1] - p[0], p[3] - p[2])
        return p[-1]

    def distance_to_boundary(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = self.params
        if self.kind == INTERVAL:
            return np.minimum(x[:, 0] - p[0], p[1] - x[:, 0])
        if self.kind == RECTANGLE:
            return np.minimum.reduce(
                [x[:, 0] - p[0], p[1] - x[:, 0], x[:, 1] - p[2], p[3] - x[:, 1]]
            )
        rho = np.hypot(x[:, 0] - p[0], x[:, 1] - p[1])
        if self.kind == DISK:
            return p[2] - rho
        return np.minimum(rho - p[2], p[3] - rho)


@dataclass
class Grid:
    """Nodes, classification and derivative operators for one domain.

    ``d1[s]`` and ``d2[s][t]`` are sparse ``(n_interior, n_nodes)`` matrices
    giving Cartesian ``u_s`` and ``u_st`` at interior nodes. ``dn`` gives the
    outward normal derivative at the rows ``boundary_rows`` (boundary nodes
    where the boundary is smooth) by second-order one-sided differences.
    """

    domain: DomainSpec
    resolution: int
    coords: np.ndarray
    is_boundary: np.ndarray
    h: float
    d1: list
    d2: list
    dn: sp.csr_matrix
    boundary_rows: np.ndarray
    dtheta: float | None = None
    shape: tuple = ()
    is_corner: np.ndarray = field(default=None)
    # interior nodes adjacent to the boundary (one cell layer)
    layer1: np.ndarray = field(default=None)

    @property
    def n_nodes(self):
        return len(self.coords)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def interior(self):
        return np.flatnonzero(~self.is_boundary)

    @property
    def boundary(self):
        return np.flatnonzero(self.is_boundary)

    def interior_jets(self, field):
        """Finite-difference jets at all interior nodes, batched."""
        field = np.asarray(field, dtype=float)
        n = self.dim
        idx = self.interior
        Du = np.stack([self.d1[s] @ field for s in range(n)], axis=-1)
        D2u = np.empty((len(idx), n, n))
        for s in range(n):
            for t in range(s, n):
                D2u[:, s, t] = self.d2[s][t] @ field
                D2u[:, t, s] = D2u[:, s, t]
        return PointJet(self.coords[idx], field[idx], Du, D2u)

    def sample(self, func):
        return np.asarray(func(self.coords), dtype=float)


def _interval_grid(domain, N):
    a, b = domain.params
    x = np.linspace(a, b, N)
    h = (b - a) / (N - 1)
    is_b = np.zeros(N, bool)
    is_b[[0, -1]] = True
    rows = np.arange(1, N - 1)
    r = np.arange(N - 2)
    ones = np.ones(N - 2)
    Dx = sp.csr_matrix(
        (np.concatenate([ones, -ones]) / (2 * h), (np.concatenate([r, r]), np.concatenate([rows + 1, rows - 1]))),
        shape=(N - 2, N),
    )
    Dxx = sp.csr_matrix(
        (
            np.concatenate([ones, -2 * ones, ones]) / h**2,
            (np.concatenate([r, r, r]), np.concatenate([rows - 1, rows, rows + 1])),
        ),
        shape=(N - 2, N),
    )
    dn = sp.csr_matrix(
        (np.array([3, -4, 1, 3, -4, 1]) / (2 * h), ([0, 0, 0, 1, 1, 1], [0, 1, 2, N - 1, N - 2, N - 3])),
        shape=(2, N),
    )
    layer1 = np.array([1, N - 2])
    return Grid(
        domain, N, x[:, None], is_b, h, [Dx], [[Dxx]], dn, np.array([0, N - 1]),
        shape=(N,), is_corner=np.zeros(N, bool), layer1=layer1,
    )


class _Stencil:
    """Row-wise accumulator for sparse difference operators."""

    def __init__(self, n_rows, n_cols):
        self.shape = (n_rows, n_cols)
        self.r, self.c, self.v = [], [], []

    def add(self, rows, cols, vals):
        rows = np.broadcast_to(rows, np.shape(cols))
        self.r.append(np.ravel(rows))
        self.c.append(np.ravel(cols))
        self.v.append(np.ravel(np.broadcast_to(vals, np.shape(cols))))

    def tocsr(self):
        if not self.r:
            return sp.csr_matrix(self.shape)
        return sp.csr_matrix(
            (np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))), shape=self.shape
        )


def _rectangle_grid(domain, N):
    x0, x1, y0, y1 = domain.params
    xs = np.linspace(x0, x1, N)
    ys = np.linspace(y0, y1, N)
    hx, hy = (x1 - x0) / (N - 1), (y1 - y0) / (N - 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel()])
    nid = np.arange(N * N).reshape(N, N)
    is_b = np.zeros((N, N), bool)
    is_b[[0, -1], :] = True
    is_b[:, [0, -1]] = True
    corner = np.zeros((N, N), bool)
    corner[[0, 0, -1, -1], [0, -1, 0, -1]] = True

    I, J = np.meshgrid(np.arange(1, N - 1), np.arange(1, N - 1), indexing="ij")
    # rows follow the ordering of interior node ids
    row_of = -np.ones(N * N, int)
    interior_ids = np.flatnonzero(~is_b.ravel())
    row_of[interior_ids] = np.arange(len(interior_ids))
    rows = row_of[nid[I, J]]
    n_int = len(interior_ids)

    def op(entries):
        st = _Stencil(n_int, N * N)
        for di, dj, val in entries:
            st.add(rows, nid[I + di, J + dj], val)
        return st.tocsr()

    Dx = op([(1, 0, 1 / (2 * hx)), (-1, 0, -1 / (2 * hx))])
    Dy = op([(0, 1, 1 / (2 * hy)), (0, -1, -1 / (2 * hy))])
    Dxx = op([(1, 0, 1 / hx**2), (0, 0, -2 / hx**2), (-1, 0, 1 / hx**2)])
    Dyy = op([(0, 1, 1 / hy**2), (0, 0, -2 / hy**2), (0, -1, 1 / hy**2)])
    q = 1 / (4 * hx * hy)
    Dxy = op([(1, 1, q), (1, -1, -q), (-1, 1, -q), (-1, -1, q)])

    # outward normal derivatives on the four sides, corners skipped
    k = np.arange(1, N - 1)
    bl, st = [], _Stencil(4 * (N - 2), N * N)
    sides = [
        (nid[0, k], nid[1, k], nid[2, k], hx),
        (nid[-1, k], nid[-2, k], nid[-3, k], hx),
        (nid[k, 0], nid[k, 1], nid[k, 2], hy),
        (nid[k, -1], nid[k, -2], nid[k, -3], hy),
    ]
    for s, (b0, b1, b2, hh) in enumerate(sides):
        rr = s * (N - 2) + np.arange(N - 2)
        st.add(rr, b0, 3 / (2 * hh))
        st.add(rr, b1, -4 / (2 * hh))
        st.add(rr, b2, 1 / (2 * hh))
        bl.append(b0)
    layer = np.zeros((N, N), bool)
    layer[[1, -2], 1:-1] = True
    layer[1:-1, [1, -2]] = True
    return Grid(
        domain, N, coords, is_b.ravel(), max(hx, hy), [Dx, Dy], [[Dxx, Dxy], [None, Dyy]],
        st.tocsr(), np.concatenate(bl), shape=(N, N), is_corner=corner.ravel(),
        layer1=np.flatnonzero(layer.ravel()),
    )


def _polar_grid(domain, N):
    """Radial x angular grid; ``N`` radial nodes (incl. boundary rings) and ``N`` sectors."""
    if N % 2:
        raise ConfigError("polar grids need an even resolution (antipodal axis coupling)")
    cx, cy = domain.params[:2]
    M = N
    dth = 2 * math.pi / M
    th = np.arange(M) * dth
    if domain.kind == DISK:
        R = domain.params[2]
        # half-cell offset: rho_i = (i + 1/2) h, last ring on the rim
        h = R / (N - 0.5)
        rho = (np.arange(N) + 0.5) * h
        rho[-1] = R
        bnd_rings = [N - 1]
    else:
        a, b = domain.params[2:]
        h = (b - a) / (N - 1)
        rho = a + np.arange(N) * h
        rho[-1] = b
        bnd_rings = [0, N - 1]
    P, T = np.meshgrid(rho, th, indexing="ij")
    coords = np.column_stack([cx + (P * np.cos(T)).ravel(), cy + (P * np.sin(T)).ravel()])
    nid = np.arange(N * M).reshape(N, M)
    is_b = np.zeros((N, M), bool)
    is_b[bnd_rings, :] = True
    interior_ids = np.flatnonzero(~is_b.ravel())
    row_of = -np.ones(N * M, int)
    row_of[interior_ids] = np.arange(len(interior_ids))
    n_int = len(interior_ids)

    ring_lo = 0 if domain.kind == DISK else 1
    I, K = np.meshgrid(np.arange(ring_lo, N - 1), np.arange(M), indexing="ij")
    rows = row_of[nid[I, K]]
    r = rho[I]
    c, s = np.cos(th[K]), np.sin(th[K])

    def node(di, dk):
        ii, kk = I + di, (K + dk) % M
        if domain.kind == DISK:
            # across the axis: (-rho, theta) is (rho, theta + pi)
            neg = ii < 0
            kk = np.where(neg, (kk + M // 2) % M, kk)
            ii = np.where(neg, -ii - 1, ii)
        return nid[ii, kk]

    # polar difference stencils as (di, dk, weight) lists
    pr = [(1, 0, 1 / (2 * h)), (-1, 0, -1 / (2 * h))]
    pt = [(0, 1, 1 / (2 * dth)), (0, -1, -1 / (2 * dth))]
    prr = [(1, 0, 1 / h**2), (0, 0, -2 / h**2), (-1, 0, 1 / h**2)]
    ptt = [(0, 1, 1 / dth**2), (0, 0, -2 / dth**2), (0, -1, 1 / dth**2)]
    q = 1 / (4 * h * dth)
    prt = [(1, 1, q), (1, -1, -q), (-1, 1, -q), (-1, -1, q)]

    def op(terms):
        """Sum of coefficient-array * polar stencil."""
        st = _Stencil(n_int, N * M)
        for coef, sten in terms:
            for di, dk, wgt in sten:
                st.add(rows, node(di, dk), coef * wgt)
        return st.tocsr()

    Dx = op([(c, pr), (-s / r, pt)])
    Dy = op([(s, pr), (c / r, pt)])
    Dxx = op([(c * c, prr), (s * s / r, pr), (s * s / r**2, ptt), (-2 * s * c / r, prt), (2 * s * c / r**2, pt)])
    Dyy = op([(s * s, prr), (c * c / r, pr), (c * c / r**2, ptt), (2 * s * c / r, prt), (-2 * s * c / r**2, pt)])
    Dxy = op(
        [
            (s * c, prr),
            (-s * c / r, pr),
            (-s * c / r**2, ptt),
            ((c * c - s * s) / r, prt),
            (-(c * c - s * s) / r**2, pt),
        ]
    )

    kk = np.arange(M)
    st = _Stencil(M * len(bnd_rings), N * M)
    bl = []
    for j, ring in enumerate(bnd_rings):
        step = -1 if ring == N - 1 else 1
        rr = j * M + kk
        st.add(rr, nid[ring, kk], 3 / (2 * h))
        st.add(rr, nid[ring + step, kk], -4 / (2 * h))
        st.add(rr, nid[ring + 2 * step, kk], 1 / (2 * h))
        bl.append(nid[ring, kk])
    layer = np.zeros((N, M), bool)
    for ring in bnd_rings:
        layer[ring + (-1 if ring == N - 1 else 1), :] = True
    return Grid(
        domain, N, coords, is_b.ravel(), h, [Dx, Dy], [[Dxx, Dxy], [None, Dyy]], st.tocsr(),
        np.concatenate(bl), dtheta=dth, shape=(N, M), is_corner=np.zeros(N * M, bool),
        layer1=np.flatnonzero(layer.ravel()),
    )


def build_grid(domain: DomainSpec, resolution: int) -> Grid:
    """Build the grid for ``domain``.

    ``resolution`` is the node count per direction: interval and rectangle
    grids are uniform tensor grids including boundary nodes; polar grids
    carry ``resolution`` radial rings (the disk's innermost at half a cell
    from the axis) times ``resolution`` angular sectors.
    """
    if int(resolution) != resolution or resolution < 8:
        raise ConfigError(f"resolution must be an integer >= 8, got {resolution}")
    N = int(resolution)
    if domain.kind == INTERVAL:
        return _interval_grid(domain, N)
    if domain.kind == RECTANGLE:
        return _rectangle_grid(domain, N)
    return _polar_grid(domain, N)


def fd_jet(grid: Grid, field, node: int) -> PointJet:
    """Finite-difference jet at one interior node."""
    if grid.is_boundary[node]:
        raise ValueError(f"node {node} is a boundary node")
    row = int(np.searchsorted(grid.interior, node))
    field = np.asarray(field, dtype=float)
    n = grid.dim
    Du = np.array([grid.d1[s].getrow(row) @ field for s in range(n)]).ravel()
    D2u = np.empty((n, n))
    for s in range(n):
        for t in range(s, n):
            D2u[s, t] = D2u[t, s] = (grid.d2[s][t].getrow(row) @ field)[0]
    return PointJet(grid.coords[node], field[node], Du, D2u)


def corner_zone(grid: Grid, cells=1):
    """Mask of nodes in the ``cells x cells`` block of grid cells at each rectangle corner.

    Empty for domains without corners.
    """
    mask = np.zeros(len(grid.coords), bool)
    if grid.domain.kind != RECTANGLE or cells <= 0:
        return mask
    N = grid.shape[0]
    idx = np.arange(N)
    near = (idx <= cells) | (idx >= N - 1 - cells)
    return (near[:, None] & near[None, :]).ravel()


def sphere_radii(domain: DomainSpec):
    """Maximal interior (``r1``) and exterior (``r2``) sphere radii of the boundary."""
    p = domain.params
    if domain.kind == INTERVAL:
        return {"r1": 0.5 * (p[1] - p[0]), "r2": math.inf}
    if domain.kind == RECTANGLE:
        return {"r1": 0.5 * min(p[1] - p[0], p[3] - p[2]), "r2": math.inf}
    if domain.kind == DISK:
        return {"r1": p[2], "r2": math.inf}
    return {"r1": 0.5 * (p[3] - p[2]), "r2": p[2]}


def field_to_csv(grid: Grid, field, fh=None):
    """Write one row per node; floats use shortest round-trip repr."""
    out = fh if fh is not None else io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    for i, (xy, b, v) in enumerate(zip(grid.coords, grid.is_boundary, field)):
        x2 = repr(float(xy[1])) if len(xy) > 1 else ""
        wr.writerow([i, repr(float(xy[0])), x2, int(b), repr(float(v))])
    return out.getvalue() if fh is None else None


def field_from_csv(text):
    """Parse :func:`field_to_csv` output into ``(coords, is_boundary, values)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"expected CSV header {CSV_COLUMNS}")
    body = rows[1:]
    if not body:
        raise ValueError("CSV has no node rows")
    ids = np.array([int(r[0]) for r in body])
    if not np.array_equal(ids, np.arange(len(body))):
        raise ValueError("node ids must be 0..N-1 in order")
    x1 = np.array([float(r[1]) for r in body])
    if all(r[2] == "" for r in body):
        coords = x1[:, None]
    else:
        coords = np.column_stack([x1, [float(r[2]) for r in body]])
    return coords, np.array([r[3] == "1" for r in body]), np.array([float(r[4]) for r in body])
