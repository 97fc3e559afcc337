"""Umbilic hyperboloid caps and barrier radii.

A lower sheet ``u(x) = r*sigma - sqrt(r^2 + |x - c|^2)`` is an exact
solution of ``G = sigma`` for every admissible curvature function, since all
its principal curvatures equal ``sigma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBarrierError, FitError
from .geometry import PointJet

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class Hyperboloid:
    center: tuple
    r: float
    sigma: float
    sheet: str = LOWER

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.r <= 0:
            raise ValueError("Minkowski radius must be positive")
        if self.sigma <= 1:
            raise ValueError("sigma must exceed 1")
        if self.sheet not in (LOWER, UPPER):
            raise ValueError(f"unknown sheet {self.sheet!r}")

    @property
    def n(self):
        return len(self.center)

    @property
    def footprint_radius(self):
        """Radius of the disk where the sheet height is positive (lower) or zero-crossing (upper)."""
        return self.r * math.sqrt(self.sigma**2 - 1.0)

    def _offset(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        return x - np.asarray(self.center)

    def height(self, x):
        d = self._offset(x)
        s = np.sqrt(self.r**2 + np.sum(d**2, axis=-1))
        rs = self.r * self.sigma
        return rs - s if self.sheet == LOWER else s - rs


def cap_jet(hyp: Hyperboloid, x) -> PointJet:
    """Closed-form jet of the sheet at ``x`` (batched over leading axes)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    d = x - np.asarray(hyp.center)
    s = np.sqrt(hyp.r**2 + np.sum(d**2, axis=-1))
    sign = -1.0 if hyp.sheet == LOWER else 1.0
    u = sign * (s - hyp.r * hyp.sigma)
    if np.any(u <= 0):
        raise ValueError("point outside the positive-height region of the sheet")
    Du = sign * d / s[..., None]
    n = d.shape[-1]
    D2u = sign * (
        np.eye(n) / s[..., None, None] - d[..., :, None] * d[..., None, :] / (s**3)[..., None, None]
    )
    return PointJet(x, u, Du, D2u)


def fit_cap_to_disk(rho, sigma, eps, center=None, n=2) -> Hyperboloid:
    """Lower sheet over the disk of radius ``rho`` taking height ``eps`` on its rim."""
    if rho <= 0 or sigma <= 1 or eps < 0:
        raise FitError(f"cannot fit a cap with rho={rho}, sigma={sigma}, eps={eps}")
    k = sigma**2 - 1.0
    # + branch; the - branch gives r*sigma < eps
    r = (sigma * eps + math.sqrt(eps**2 + k * rho**2)) / k
    if not r * sigma > eps:
        raise FitError("no admissible root")
    center = np.zeros(n) if center is None else center
    return Hyperboloid(center, r, sigma, LOWER)


def rim_weight(hyp: Hyperboloid, eps):
    """``w = sqrt(1 - |Du|^2)`` where the lower sheet crosses height ``eps``."""
    return hyp.r / (hyp.r * hyp.sigma - eps)


@dataclass
class BarrierRadii:
    R1: float
    R2: float
    angle_low: float
    angle_high: float

    def nu_bounds(self, u, sigma):
        """Two-sided bound on ``nu^{n+1}`` at height ``u`` from the tangent hyperboloids."""
        lo = (sigma * self.R1 - u) / self.R1
        hi = math.inf if math.isinf(self.R2) else (sigma * self.R2 + u) / self.R2
        return lo, hi


def barrier_radii(r1, r2, sigma, eps) -> BarrierRadii:
    """Radii of the tangent barrier hyperboloids and the induced angle bounds.

    ``r2 = inf`` (convex domains) gives ``R2 = inf`` and a zero lower bound.
    """
    if not r1 > eps or not r2 > eps:
        raise DegenerateBarrierError(f"sphere radii must exceed eps (r1={r1}, r2={r2}, eps={eps})")
    root = math.sqrt(sigma**2 - 1.0)
    d1 = r1**2 - eps**2
    inv_R1 = (-eps * sigma + math.sqrt(r1**2 * (sigma**2 - 1.0) + eps**2)) / d1
    high = r1 * root / d1 + eps * (sigma - 1.0) / d1
    if math.isinf(r2):
        inv_R2, low = 0.0, 0.0
    else:
        d2 = r2**2 - eps**2
        inv_R2 = (eps * sigma + math.sqrt((sigma**2 - 1.0) * r2**2 + eps**2)) / d2
        low = -r2 * root / d2 - eps * (1.0 + sigma) / d2
    return BarrierRadii(
        R1=1.0 / inv_R1,
        R2=math.inf if inv_R2 == 0 else 1.0 / inv_R2,
        angle_low=low,
        angle_high=high,
    )
