"""Rectangle probabilities of the multivariate standard normal distribution.

Dimensions 1 and 2 are computed deterministically (closed form and adaptive
quadrature). Higher dimensions use the separation-of-variables transform of
Genz with randomized (scrambled Sobol) quasi-Monte Carlo points; the spread
over independent scrambles gives the error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, special
from scipy.sparse.csgraph import connected_components
from scipy.stats import qmc

__all__ = [
    "MvnSettings",
    "MvnResult",
    "MvnBudgetWarning",
    "cdf_univariate",
    "quantile_univariate",
    "mvn_prob",
    "mvn_prob_batch",
    "orthant_2d",
]

_TINY = np.finfo(float).tiny
_ONE_MINUS = 1.0 - 2.0**-53


class MvnBudgetWarning(RuntimeWarning):
    """Integration stopped at the sample budget before reaching the target."""


@dataclass(frozen=True)
class MvnSettings:
    """Accuracy controls for :func:`mvn_prob`.

    ``abs_error`` is the target for the reported error (three standard errors
    over ``n_scrambles`` independent randomizations). ``max_points`` caps the
    total number of integrand evaluations per rectangle.
    """

    abs_error: float = 1e-6
    max_points: int = 2**21
    seed: int = 20240601
    n_scrambles: int = 8
    min_points: int = 2**9

    def __post_init__(self):
        if not 0.0 < self.abs_error <= 1e-2:
            raise ValueError("abs_error must lie in (0, 1e-2]")
        if self.max_points < 1000:
            raise ValueError("max_points must be at least 1000")
        if self.n_scrambles < 2:
            raise ValueError("n_scrambles must be at least 2")

    def with_error(self, abs_error: float) -> "MvnSettings":
        return MvnSettings(abs_error, self.max_points, self.seed, self.n_scrambles, self.min_points)


BOUNDARY_SETTINGS = MvnSettings(abs_error=1e-6)
ESS_SETTINGS = MvnSettings(abs_error=1e-5)


class MvnResult(NamedTuple):
    prob: float
    error: float
    converged: bool


def cdf_univariate(x):
    """Standard normal distribution function."""
    return special.ndtr(x)


def quantile_univariate(p):
    """Standard normal quantile; ``p`` must lie strictly inside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("quantile requires 0 < p < 1")
    out = special.ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out


def _interval_prob(a, b):
    # evaluate on the side of the mean that keeps the small tail accurate
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    flip = (a + b) > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    return np.maximum(special.ndtr(hi) - special.ndtr(lo), 0.0)


def orthant_2d(rho: float) -> float:
    """P(X > 0, Y > 0) for a standard bivariate normal with correlation rho."""
    return 0.25 + np.arcsin(rho) / (2.0 * np.pi)


def _bvn_rect(a1, b1, a2, b2, rho) -> float:
    if rho == 0.0:
        return float(_interval_prob(a1, b1) * _interval_prob(a2, b2))
    s = np.sqrt(max(1.0 - rho * rho, 0.0))
    if s < 1e-12:
        lo = max(a1, a2 if rho > 0 else -b2)
        hi = min(b1, b2 if rho > 0 else -a2)
        return float(_interval_prob(lo, hi)) if hi > lo else 0.0
    lo = max(a1, -9.5)
    hi = min(b1, 9.5)
    if hi <= lo:
        return 0.0

    def inner(x):
        return np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi) * _interval_prob(
            (a2 - rho * x) / s, (b2 - rho * x) / s
        )

    pts = [p / rho for p in (a2, b2) if np.isfinite(p) and lo < p / rho < hi]
    val, _ = integrate.quad(inner, lo, hi, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(min(max(val, 0.0), 1.0))


@lru_cache(maxsize=256)
def _sobol_points(dim: int, log2_n: int, seed: int, scramble_index: int) -> np.ndarray:
    rng = np.random.default_rng([seed, dim, scramble_index])
    sampler = qmc.Sobol(dim, scramble=True, seed=rng)
    return sampler.random_base2(log2_n)


def _points(dim, n_points, seed, r):
    log2_n = max(int(np.ceil(np.log2(n_points))), 1)
    return _sobol_points(dim, log2_n, seed, r)[:n_points]


def _ordered_cholesky(corr, a, b):
    """Cholesky factor with Genz-Bretz prioritisation (smallest interval first).

    Returns the permutation and the lower-triangular factor of the permuted
    matrix. Zero pivots are kept as zero columns (semidefinite input).
    """
    d = len(a)
    c = corr.copy()
    a = a.copy()
    b = b.copy()
    perm = np.arange(d)
    L = np.zeros((d, d))
    y = np.zeros(d)
    for i in range(d):
        best, best_p = i, np.inf
        for j in range(i, d):
            v = c[j, j] - L[j, :i] @ L[j, :i]
            sd = np.sqrt(max(v, 0.0))
            if sd <= 1e-12:
                p = 1.0
            else:
                m = L[j, :i] @ y[:i]
                p = float(_interval_prob((a[j] - m) / sd, (b[j] - m) / sd))
            if p < best_p:
                best, best_p = j, p
        if best != i:
            for arr in (a, b, perm):
                arr[[i, best]] = arr[[best, i]]
            c[[i, best], :] = c[[best, i], :]
            c[:, [i, best]] = c[:, [best, i]]
            L[[i, best], :] = L[[best, i], :]
        v = c[i, i] - L[i, :i] @ L[i, :i]
        if v <= 1e-14:
            L[i, i] = 0.0
            y[i] = 0.0
            continue
        L[i, i] = np.sqrt(v)
        for j in range(i + 1, d):
            L[j, i] = (c[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
        m = L[i, :i] @ y[:i]
        lo, hi = (a[i] - m) / L[i, i], (b[i] - m) / L[i, i]
        mass = float(_interval_prob(lo, hi))
        if mass > 1e-300:
            phi_lo = 0.0 if not np.isfinite(lo) else np.exp(-0.5 * lo * lo)
            phi_hi = 0.0 if not np.isfinite(hi) else np.exp(-0.5 * hi * hi)
            y[i] = (phi_lo - phi_hi) / (np.sqrt(2 * np.pi) * mass)
        else:
            y[i] = lo if np.isfinite(lo) else hi
    return perm, L


def _plain_cholesky(corr):
    d = corr.shape[0]
    L = np.zeros((d, d))
    for i in range(d):
        v = corr[i, i] - L[i, :i] @ L[i, :i]
        if v <= 1e-14:
            continue
        L[i, i] = np.sqrt(v)
        L[i + 1 :, i] = (corr[i + 1 :, i] - L[i + 1 :, :i] @ L[i, :i]) / L[i, i]
    return L


def _genz_values(L, a, b, w):
    """Integrand values for limit batches ``a``/``b`` (B, d) at points ``w`` (M, d-1)."""
    B, d = a.shape
    M = w.shape[0]
    f = np.ones((B, M))
    y = np.zeros((B, M, d))
    for i in range(d):
        s = y[:, :, :i] @ L[i, :i] if i else np.zeros((B, M))
        lii = L[i, i]
        if lii == 0.0:
            inside = (a[:, i, None] <= s) & (s <= b[:, i, None])
            f *= inside
            continue
        lo = (a[:, i, None] - s) / lii
        hi = (b[:, i, None] - s) / lii
        flip = (lo + hi) > 0
        tlo = np.where(flip, -hi, lo)
        thi = np.where(flip, -lo, hi)
        c = special.ndtr(tlo)
        p = np.maximum(special.ndtr(thi) - c, 0.0)
        f *= p
        if i < d - 1:
            u = np.clip(c + w[None, :, i] * p, _TINY, _ONE_MINUS)
            z = special.ndtri(u)
            y[:, :, i] = np.where(flip, -z, z)
    return f


def _genz_batch(L, a, b, settings: MvnSettings):
    """Adaptive RQMC over a batch of rectangles sharing one factor ``L``."""
    B, d = a.shape
    R = settings.n_scrambles
    n = settings.min_points
    done = 0
    sums = np.zeros((R, B))
    while True:
        for r in range(R):
            w = _points(max(d - 1, 1), n, settings.seed, r)[done:n]
            sums[r] += _genz_values(L, a, b, w).sum(axis=1)
        done = n
        est = sums / done
        mean = est.mean(axis=0)
        err = 3.0 * est.std(axis=0, ddof=1) / np.sqrt(R)
        if np.all(err <= settings.abs_error):
            return mean, err, True
        if 2 * n * R > settings.max_points:
            return mean, err, False
        n *= 2


def _prepare(lower, upper, corr):
    a = np.asarray(lower, dtype=float).ravel()
    b = np.asarray(upper, dtype=float).ravel()
    c = np.asarray(corr, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1, 1)
    if c.shape != (len(a), len(a)) or len(b) != len(a):
        raise ValueError("dimension mismatch between limits and correlation matrix")
    if np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise ValueError("limits must not be NaN")
    if len(a) > 25:
        raise ValueError("dimension above 25 is not supported")
    return a, b, c


def _blocks(c):
    adj = np.abs(c) > 1e-15
    n_comp, labels = connected_components(adj, directed=False)
    return [np.flatnonzero(labels == g) for g in range(n_comp)]


def mvn_prob(lower, upper, corr, settings: MvnSettings = BOUNDARY_SETTINGS) -> MvnResult:
    """P(lower < Z < upper) for Z ~ N(0, corr), corr a correlation matrix.

    Infinite limits are allowed. Coordinates unrestricted on both sides are
    marginalised out and uncorrelated blocks are integrated separately.
    """
    a, b, c = _prepare(lower, upper, corr)
    if np.any(b <= a):
        return MvnResult(0.0, 0.0, True)
    keep = np.isfinite(a) | np.isfinite(b)
    a, b, c = a[keep], b[keep], c[np.ix_(keep, keep)]
    if len(a) == 0:
        return MvnResult(1.0, 0.0, True)
    prob, err, ok = 1.0, 0.0, True
    for idx in _blocks(c):
        p, e, good = _block_prob(a[idx], b[idx], c[np.ix_(idx, idx)], settings)
        err = err * p + e * prob
        prob *= p
        ok &= good
        if prob == 0.0:
            break
    return MvnResult(float(min(max(prob, 0.0), 1.0)), float(err), ok)


def _block_prob(a, b, c, settings):
    d = len(a)
    if d == 1:
        return float(_interval_prob(a[0], b[0])), 0.0, True
    if d == 2:
        return _bvn_rect(a[0], b[0], a[1], b[1], float(c[0, 1])), 1e-12, True
    perm, L = _ordered_cholesky(c, a, b)
    mean, err, ok = _genz_batch(L, a[perm][None, :], b[perm][None, :], settings)
    return float(mean[0]), float(err[0]), ok


def mvn_prob_batch(lowers, uppers, corr, settings: MvnSettings = ESS_SETTINGS):
    """Vectorised :func:`mvn_prob` for many rectangles sharing ``corr``.

    Returns ``(probs, errors, converged)`` arrays. Rows are integrated in the
    natural variable order with a common Cholesky factor and common points,
    so results for the rows are positively correlated.
    """
    A = np.atleast_2d(np.asarray(lowers, dtype=float))
    Bm = np.atleast_2d(np.asarray(uppers, dtype=float))
    c = np.atleast_2d(np.asarray(corr, dtype=float))
    n, d = A.shape
    if Bm.shape != (n, d) or c.shape != (d, d):
        raise ValueError("dimension mismatch between limits and correlation matrix")
    probs = np.zeros(n)
    errs = np.zeros(n)
    conv = np.ones(n, dtype=bool)
    empty = np.any(Bm <= A, axis=1)
    live = np.flatnonzero(~empty)
    if len(live) == 0:
        return probs, errs, conv
    if d <= 2:
        for i in live:
            r = mvn_prob(A[i], Bm[i], c, settings)
            probs[i], errs[i], conv[i] = r
        return probs, errs, conv
    L = _plain_cholesky(c)
    mean, err, ok = _genz_batch(L, A[live], Bm[live], settings)
    probs[live] = np.clip(mean, 0.0, 1.0)
    errs[live] = err
    conv[live] = ok
    return probs, errs, conv
