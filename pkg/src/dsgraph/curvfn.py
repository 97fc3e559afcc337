"""Admissible curvature functions on the positive cone.

Two families are supported:

* ``quotient``: ``f = (sigma_n / sigma_l) ** (1 / (n - l))`` with ``0 <= l < n``
* ``symroot``:  ``f = sigma_l ** (1 / l)`` with ``1 <= l <= n``

where ``sigma_l`` is the l-th elementary symmetric polynomial normalized so
that ``sigma_l(1, ..., 1) = 1``. All functions broadcast over leading axes:
``lam`` has shape ``(..., n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, InadmissibleError

QUOTIENT = "quotient"
SYMROOT = "symroot"
FAMILIES = (QUOTIENT, SYMROOT)


@dataclass(frozen=True)
class CurvatureSpec:
    """Which curvature function ``f`` to use: family, index ``l`` and dimension ``n``."""

    family: str
    l: int
    n: int

    def __post_init__(self):
        fam = str(self.family).lower()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ConfigError(f"unknown curvature family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1:
            raise ConfigError(f"dimension n must be >= 1, got {self.n}")
        if fam == QUOTIENT and not 0 <= self.l < self.n:
            raise ConfigError(f"quotient family requires 0 <= l < n, got l={self.l}, n={self.n}")
        if fam == SYMROOT and not 1 <= self.l <= self.n:
            raise ConfigError(f"symroot family requires 1 <= l <= n, got l={self.l}, n={self.n}")

    def __call__(self, lam):
        return eval_f(self, lam)

    def grad(self, lam):
        return grad_f(self, lam)

    def dual(self, lam):
        return dual_eval(self, lam)


def all_specs(n):
    """Every supported spec in dimension ``n``."""
    specs = [CurvatureSpec(QUOTIENT, l, n) for l in range(n)]
    specs += [CurvatureSpec(SYMROOT, l, n) for l in range(1, n + 1)]
    return specs


def _elem_sym_raw(lam):
    """Unnormalized e_0..e_n along the last axis, by the product recurrence."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for j in range(n):
        x = lam[..., j]
        # descending k so e[k-1] is still the previous polynomial
        for k in range(j + 1, 0, -1):
            e[..., k] = e[..., k] + x * e[..., k - 1]
    return e


def elem_sym(lam, l):
    """Normalized elementary symmetric polynomial ``sigma_l``; ``sigma_0 = 1``."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 0 <= l <= n:
        raise ValueError(f"index l={l} out of range 0..{n}")
    return _elem_sym_raw(lam)[..., l] / comb(n, l)


def _elem_sym_grad(lam, l):
    """d sigma_l / d lam_i = e_{l-1}(lam without i) / binom(n, l)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if l == 0:
        return np.zeros_like(lam)
    out = np.empty_like(lam)
    for i in range(n):
        rest = np.delete(lam, i, axis=-1)
        out[..., i] = _elem_sym_raw(rest)[..., l - 1]
    return out / comb(n, l)


def _check_cone(lam):
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        raise ValueError("lambda must be a vector")
    if not np.all(lam > 0):
        raise InadmissibleError(
            "curvature argument outside the positive cone", min_eig=float(np.min(lam))
        )
    return lam


def _dim_check(spec, lam):
    if lam.shape[-1] != spec.n:
        raise ValueError(f"expected {spec.n} components, got {lam.shape[-1]}")


def eval_f(spec: CurvatureSpec, lam):
    lam = _check_cone(lam)
    _dim_check(spec, lam)
    e = _elem_sym_raw(lam)
    n, l = spec.n, spec.l
    if spec.family == QUOTIENT:
        ratio = (e[..., n] / comb(n, n)) / (e[..., l] / comb(n, l))
        return ratio ** (1.0 / (n - l))
    return (e[..., l] / comb(n, l)) ** (1.0 / l)


def grad_f(spec: CurvatureSpec, lam):
    """Analytic partial derivatives ``f_i``."""
    lam = _check_cone(lam)
    _dim_check(spec, lam)
    n, l = spec.n, spec.l
    f = eval_f(spec, lam)[..., None]
    if spec.family == QUOTIENT:
        dn = _elem_sym_grad(lam, n) / elem_sym(lam, n)[..., None]
        dl = _elem_sym_grad(lam, l) / elem_sym(lam, l)[..., None]
        return f / (n - l) * (dn - dl)
    return f / l * _elem_sym_grad(lam, l) / elem_sym(lam, l)[..., None]


def grad_f_fd(spec: CurvatureSpec, lam, rel_step=1e-6):
    """Central-difference gradient; cross-check only."""
    lam = _check_cone(lam)
    out = np.empty_like(lam)
    for i in range(lam.shape[-1]):
        h = rel_step * lam[..., i]
        up, dn = lam.copy(), lam.copy()
        up[..., i] += h
        dn[..., i] -= h
        out[..., i] = (eval_f(spec, up) - eval_f(spec, dn)) / (2 * h)
    return out


def dual_eval(spec: CurvatureSpec, lam):
    """``f*(lam) = 1 / f(1/lam)``."""
    lam = _check_cone(lam)
    return 1.0 / eval_f(spec, 1.0 / lam)


def dual_grad(spec: CurvatureSpec, lam):
    lam = _check_cone(lam)
    inv = 1.0 / lam
    fs = eval_f(spec, inv)[..., None]
    return grad_f(spec, inv) / (fs**2 * lam**2)


class LimitResult(NamedTuple):
    value: float | None
    diverged: bool


def limit_at_infinity(spec: CurvatureSpec, lambda_prefix, R):
    """Evaluate ``f(lam', 1 + R)``; diverging families return a flag instead."""
    prefix = _check_cone(lambda_prefix)
    if prefix.shape[-1] != spec.n - 1:
        raise ValueError(f"prefix must have n-1={spec.n - 1} components")
    if R < 0:
        raise ValueError("R must be non-negative")
    if spec.family == SYMROOT or spec.l == 0:
        # sigma_n (or sigma_l) grows linearly in R; no finite limit
        if R > 0:
            return LimitResult(None, True)
    lam = np.append(prefix, 1.0 + R)
    return LimitResult(float(eval_f(spec, lam)), False)


def quotient_limit_value(spec: CurvatureSpec):
    """Closed-form ``(n / l) ** (1 / (n - l))`` for quotients with ``l >= 1``."""
    if spec.family != QUOTIENT or spec.l == 0:
        return None
    return (spec.n / spec.l) ** (1.0 / (spec.n - spec.l))


@dataclass
class StructureReport:
    samples_tested: int
    monotone_ok: bool
    concave_ok: bool
    dual_concave_ok: bool
    normalization_ok: bool
    homogeneity_ok: bool
    sumfi_ok: bool
    sumfi_lambda2_ok: bool
    f_le_mean_ok: bool
    worst_violation: float
    details: dict = field(default_factory=dict)

    @property
    def all_ok(self):
        return all(
            (
                self.monotone_ok,
                self.concave_ok,
                self.dual_concave_ok,
                self.normalization_ok,
                self.homogeneity_ok,
                self.sumfi_ok,
                self.sumfi_lambda2_ok,
                self.f_le_mean_ok,
            )
        )


CONCAVITY_TOL = 1e-9
INEQ_TOL = 1e-10
HOMOG_TOL = 1e-12


def check_structure(spec: CurvatureSpec, sample_count=10_000, seed=0) -> StructureReport:
    """Sample the positive cone and check the structure conditions on ``f``.

    Components are log-uniform in ``[1e-2, 1e2]``. Each check records its
    worst slack (negative means violated); the report's ``worst_violation``
    is the largest violation magnitude, 0 if every check passes.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    size = (sample_count, n)
    lam = 10.0 ** rng.uniform(-2, 2, size)
    mu = 10.0 ** rng.uniform(-2, 2, size)
    t = rng.uniform(0.1, 10.0, sample_count)

    f = eval_f(spec, lam)
    fi = grad_f(spec, lam)
    slack = {}
    slack["monotone"] = float(np.min(fi))
    mid = eval_f(spec, 0.5 * (lam + mu))
    slack["concave"] = float(np.min(mid - 0.5 * (f + eval_f(spec, mu)) + CONCAVITY_TOL))
    dmid = dual_eval(spec, 0.5 * (lam + mu))
    slack["dual_concave"] = float(
        np.min(dmid - 0.5 * (dual_eval(spec, lam) + dual_eval(spec, mu)) + CONCAVITY_TOL)
    )
    slack["normalization"] = HOMOG_TOL - abs(float(eval_f(spec, np.ones(n))) - 1.0)
    scaled = eval_f(spec, t[:, None] * lam)
    slack["homogeneity"] = float(np.min(HOMOG_TOL * t * f - np.abs(scaled - t * f)))
    slack["sumfi"] = float(np.min(fi.sum(-1) - 1.0 + INEQ_TOL))
    slack["sumfi_lambda2"] = float(np.min((fi * lam**2).sum(-1) - f**2 * (1.0 - INEQ_TOL)))
    mean = lam.mean(-1)
    slack["f_le_mean"] = float(np.min(mean * (1.0 + INEQ_TOL) - f))

    ok = {k: v > 0 if k == "monotone" else v >= 0 for k, v in slack.items()}
    worst = max([0.0] + [-v for v in slack.values() if v < 0])
    return StructureReport(
        samples_tested=sample_count,
        monotone_ok=ok["monotone"],
        concave_ok=ok["concave"],
        dual_concave_ok=ok["dual_concave"],
        normalization_ok=ok["normalization"],
        homogeneity_ok=ok["homogeneity"],
        sumfi_ok=ok["sumfi"],
        sumfi_lambda2_ok=ok["sumfi_lambda2"],
        f_le_mean_ok=ok["f_le_mean"],
        worst_violation=worst,
        details=slack,
    )
