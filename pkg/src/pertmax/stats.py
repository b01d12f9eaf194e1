"""ECDF-based tests and the probability that ``theta + v B(1)`` is negative."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .core import DomainError, TailLaw


@dataclass(frozen=True)
class KsReport:
    statistic: float
    n1: int
    n2: int
    p_value: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def kolmogorov_sf(x: float) -> float:
    """``P(K > x)`` for the Kolmogorov distribution.

    Uses ``2 sum (-1)^(k-1) exp(-2 k^2 x^2)`` for large ``x`` and the
    Jacobi-transformed series ``1 - sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2))``
    for small ``x``, where each converges in a handful of terms.
    """
    if x <= 0:
        return 1.0
    if x < 1.18:
        w = math.pi ** 2 / (8.0 * x * x)
        s = sum(math.exp(-(2 * k - 1) ** 2 * w) for k in range(1, 12))
        p = 1.0 - math.sqrt(2.0 * math.pi) / x * s
    else:
        p = 2.0 * sum((-1) ** (k - 1) * math.exp(-2.0 * k * k * x * x) for k in range(1, 101))
    return min(1.0, max(0.0, p))


def _as_sample(xs) -> np.ndarray:
    arr = np.asarray(xs, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DomainError("sample must be nonempty")
    if np.any(np.isnan(arr)):
        raise DomainError("sample contains NaN")
    return arr


def ks_two_sample(xs, ys) -> KsReport:
    """Two-sample Kolmogorov-Smirnov statistic with asymptotic p-value
    (effective size ``n1 n2 / (n1 + n2)``)."""
    x = np.sort(_as_sample(xs))
    y = np.sort(_as_sample(ys))
    n1, n2 = x.size, y.size
    grid = np.concatenate((x, y))
    d = float(np.max(np.abs(np.searchsorted(x, grid, side="right") / n1
                            - np.searchsorted(y, grid, side="right") / n2)))
    en = math.sqrt(n1 * n2 / (n1 + n2))
    return KsReport(d, n1, n2, kolmogorov_sf(en * d))


def ks_one_sample(xs, cdf: Callable) -> KsReport:
    """Exact ``D_n`` against a continuous ``cdf`` (vectorised callable)."""
    x = np.sort(_as_sample(xs))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    d = min(1.0, max(0.0, d))
    return KsReport(d, n, 0, kolmogorov_sf(math.sqrt(n) * d))


def quantiles(xs, qs) -> np.ndarray:
    """Linear-interpolation (type 7) sample quantiles."""
    x = _as_sample(xs)
    qs = np.asarray(qs, dtype=float)
    if np.any((qs < 0) | (qs > 1)):
        raise DomainError("quantile levels must lie in [0, 1]")
    return np.quantile(x, qs, method="linear")


def frechet_cdf(x, tail: TailLaw):
    """``exp(-c x^-a)`` for ``x > 0`` and 0 otherwise."""
    x = np.asarray(x, dtype=float)
    pos = np.where(x > 0, x, 1.0)
    out = np.where(x > 0, np.exp(-tail.c * pos ** -tail.a), 0.0)
    return float(out) if out.ndim == 0 else out


def normal_cdf(x, sigma: float = 1.0):
    x = np.asarray(x, dtype=float)
    out = ndtr(x / sigma)
    return float(out) if out.ndim == 0 else out


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _adaptive_simpson(g, a, b, tol, depth=50):
    def simpson(fa, fm, fb, a, b):
        return (b - a) * (fa + 4.0 * fm + fb) / 6.0

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = g(lm), g(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fm, fb = g(a), g(0.5 * (a + b)), g(b)
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def prob_conjecture_negative(c: float, v: float, a: float = 2.0, tol: float = 1e-6) -> float:
    """``P(theta + v Z < 0)`` with ``theta`` Frechet ``exp(-c x^-a)``.

    Conditioning on ``theta`` gives ``int Phi(-x / v) dF_theta(x)``; with
    ``u = x^-a`` this is ``int_0^inf c exp(-c u) Phi(-u^(-1/a) / v) du``.
    The integrand vanishes at 0 and is smooth, and the part beyond ``U`` is
    at most ``exp(-c U) / 2``, so ``U`` is chosen to make that negligible
    next to ``tol`` before integrating ``[0, U]`` by adaptive Simpson.
    """
    if not (c > 0 and v > 0 and a > 0):
        raise DomainError("c, v and a must be positive")

    def g(u):
        if u <= 0.0:
            return 0.0
        return c * math.exp(-c * u) * _phi(-u ** (-1.0 / a) / v)

    upper = math.log(0.5 / (1e-3 * tol)) / c
    return _adaptive_simpson(g, 0.0, upper, tol)
