"""Pointwise geometry of spacelike graphs in the half-space model.

Every function accepts a :class:`PointJet` whose arrays may carry leading
batch axes: ``u`` has shape ``B``, ``Du`` shape ``B + (n,)`` and ``D2u``
shape ``B + (n, n)``. Grid drivers pass all interior nodes at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import curvfn
from .curvfn import CurvatureSpec
from .errors import InadmissibleError, NotSpacelikeError, OutOfHalfspaceError


@dataclass
class PointJet:
    """Second-order jet ``(x, u, Du, D2u)`` of a height function."""

    x: np.ndarray
    u: np.ndarray
    Du: np.ndarray
    D2u: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.Du = np.asarray(self.Du, dtype=float)
        self.D2u = np.asarray(self.D2u, dtype=float)
        if self.Du.ndim == 0:
            self.Du = self.Du.reshape(1)
        if self.D2u.ndim < 2:
            self.D2u = self.D2u.reshape(self.Du.shape + (1,))

    @property
    def n(self):
        return self.Du.shape[-1]

    def __getitem__(self, idx):
        return PointJet(self.x[idx], self.u[idx], self.Du[idx], self.D2u[idx])


@dataclass
class GeometryEval:
    w: np.ndarray
    nu_n1: np.ndarray
    gamma: np.ndarray
    a_tilde: np.ndarray
    a_desitter: np.ndarray
    kappa_tilde: np.ndarray
    kappa: np.ndarray
    g_first: np.ndarray
    h_second: np.ndarray
    p_hessian: np.ndarray
    # eigenvectors of a_desitter, columns ordered like kappa
    frame: np.ndarray


@dataclass
class LinearizationCoeffs:
    G_st: np.ndarray
    G_s: np.ndarray
    G_u: np.ndarray
    F_ij: np.ndarray
    value: np.ndarray


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _eye_like(p):
    n = p.shape[-1]
    return np.broadcast_to(np.eye(n), p.shape[:-1] + (n, n))


def gradient_weight(Du, check=True):
    """``w = sqrt(1 - |Du|^2)``; raises unless every point is spacelike."""
    s = np.sum(np.asarray(Du) ** 2, axis=-1)
    if check and np.any(s >= 1.0):
        raise NotSpacelikeError(f"|Du| >= 1 (max |Du|^2 = {np.max(s):.6g})")
    return np.sqrt(1.0 - s)


def gamma_matrix(Du, w):
    return _eye_like(Du) + _outer(Du, Du) / (w * (1.0 + w))[..., None, None]


def eval_jet(jet: PointJet) -> GeometryEval:
    u, p, M = jet.u, jet.Du, jet.D2u
    if np.any(u <= 0):
        raise OutOfHalfspaceError(f"height must be positive (min u = {np.min(u):.6g})")
    w = gradient_weight(p)
    I = _eye_like(p)
    gam = gamma_matrix(p, w)
    gMg = gam @ M @ gam
    wi = (1.0 / w)[..., None, None]
    a_tilde = -wi * gMg
    a_ds = wi * (I - u[..., None, None] * gMg)
    # symmetrize round-off before the eigensolver
    a_tilde = 0.5 * (a_tilde + np.swapaxes(a_tilde, -1, -2))
    a_ds = 0.5 * (a_ds + np.swapaxes(a_ds, -1, -2))
    kappa_tilde = np.linalg.eigvalsh(a_tilde)
    kappa, frame = np.linalg.eigh(a_ds)
    ppT = _outer(p, p)
    u2 = (u**2)[..., None, None]
    p_hess = I - ppT - u[..., None, None] * M
    return GeometryEval(
        w=w,
        nu_n1=1.0 / w,
        gamma=gam,
        a_tilde=a_tilde,
        a_desitter=a_ds,
        kappa_tilde=kappa_tilde,
        kappa=kappa,
        g_first=(I - ppT) / u2,
        h_second=p_hess / (u2 * w[..., None, None]),
        p_hessian=p_hess,
        frame=frame,
    )


def is_admissible(ev: GeometryEval):
    """True where ``kappa`` lies in the positive cone (and ``w > 0``)."""
    return (ev.kappa[..., 0] > 0) & (ev.w > 0)


def _require_admissible(ev):
    ok = is_admissible(ev)
    if not np.all(ok):
        kmin = float(np.min(ev.kappa[..., 0]))
        node = None if np.ndim(ok) == 0 else int(np.flatnonzero(~np.ravel(ok))[0])
        raise InadmissibleError(
            f"jet not admissible: min principal curvature {kmin:.6g}", min_eig=kmin, node=node
        )


def eval_G(spec: CurvatureSpec, jet: PointJet, ev: GeometryEval | None = None):
    """``G(D2u, Du, u) = f(kappa[A[u]])``."""
    ev = eval_jet(jet) if ev is None else ev
    _require_admissible(ev)
    return curvfn.eval_f(spec, ev.kappa)


def matrix_gradient(spec: CurvatureSpec, ev: GeometryEval):
    """Gradient of ``F(A) = f(eig(A))`` with respect to ``A``: ``Q diag(f_i) Q^T``."""
    fi = curvfn.grad_f(spec, ev.kappa)
    Q = ev.frame
    return (Q * fi[..., None, :]) @ np.swapaxes(Q, -1, -2), fi


def linearize_G(spec: CurvatureSpec, jet: PointJet, ev: GeometryEval | None = None):
    """Analytic coefficients of the linearized operator ``G^st d_st + G^s d_s + G_u``.

    ``G_st`` is the symmetric derivative with respect to ``u_st`` (each of
    ``u_st`` and ``u_ts`` counted separately), so ``G_st : D2u`` is the
    directional derivative along ``D2u``.
    """
    ev = eval_jet(jet) if ev is None else ev
    _require_admissible(ev)
    F, fi = matrix_gradient(spec, ev)
    u, p = jet.u, jet.Du
    w, gam, A = ev.w, ev.gamma, ev.a_desitter
    sigma = curvfn.eval_f(spec, ev.kappa)
    sum_fi = fi.sum(-1)

    G_st = -(u / w)[..., None, None] * (gam @ F @ gam)
    G_u = (sigma - sum_fi / w) / u

    # first-order terms in closed form
    wb = w[..., None]
    FA = F @ A
    t1 = p / wb**2 * sigma[..., None]
    # F^{ij} a_ik u_k gamma^{sj} w  ->  (gamma F A p)_s w
    Ap = (FA @ p[..., None])[..., 0]
    t2a = (gam @ Ap[..., None])[..., 0] * wb
    # F^{ij} a_ik u_j gamma^{ks}  ->  (gamma A F p)_s
    Fp = (F @ p[..., None])[..., 0]
    t2b = (gam @ (A @ Fp[..., None]))[..., 0]
    t2 = 2.0 * (t2a + t2b) / (wb * (1.0 + wb))
    t3 = -2.0 * (gam @ Fp[..., None])[..., 0] / wb**2
    G_s = t1 + t2 + t3
    return LinearizationCoeffs(G_st=G_st, G_s=G_s, G_u=G_u, F_ij=F, value=sigma)


def linearize_G_fd(spec: CurvatureSpec, jet: PointJet, step=1e-5):
    """Central finite differences of :func:`eval_G`; oracle for :func:`linearize_G`.

    Single (unbatched) jets only.
    """
    n = jet.n

    def G(u, p, M):
        return float(eval_G(spec, PointJet(jet.x, u, p, M)))

    u, p, M = float(jet.u), jet.Du.copy(), jet.D2u.copy()
    G_u = (G(u + step, p, M) - G(u - step, p, M)) / (2 * step)
    G_s = np.empty(n)
    for s in range(n):
        e = np.zeros(n)
        e[s] = step
        G_s[s] = (G(u, p + e, M) - G(u, p - e, M)) / (2 * step)
    G_st = np.empty((n, n))
    for s in range(n):
        for t in range(n):
            E = np.zeros((n, n))
            E[s, t] = step
            G_st[s, t] = (G(u, p, M + E) - G(u, p, M - E)) / (2 * step)
    # derivative wrt a non-symmetric perturbation; symmetrize to match the analytic convention
    G_st = 0.5 * (G_st + G_st.T)
    return G_st, G_s, G_u
