"""Two-sample tests, weighted variants and bootstrap confidence intervals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError
from .rng import philox


def kolmogorov_sf(lam: float, terms: int = 101) -> float:
    """Survival function of the Kolmogorov distribution.

    Alternating series 2 sum (-1)^{k-1} e^{-2 k^2 lam^2} for lam above ~0.3;
    the theta-function dual for small lam (where the alternating series
    converges slowly).
    """
    if lam <= 0:
        return 1.0
    if lam < 0.3:
        # dual form: P(K <= lam) = (sqrt(2 pi)/lam) sum e^{-(2k-1)^2 pi^2 / (8 lam^2)}
        s = 0.0
        for k in range(1, 20):
            s += np.exp(-((2 * k - 1) ** 2) * np.pi**2 / (8.0 * lam * lam))
        return float(np.clip(1.0 - np.sqrt(2.0 * np.pi) / lam * s, 0.0, 1.0))
    s = 0.0
    for k in range(1, terms):
        term = 2.0 * (-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam)
        s += term
        if abs(term) < 1e-16:
            break
    return float(np.clip(s, 0.0, 1.0))


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> tuple:
    """Classical two-sample Kolmogorov-Smirnov test.

    Returns (D, p) with the asymptotic Kolmogorov p-value at
    lam = D sqrt(nm / (n + m)).  Ties are handled by evaluating both
    empirical CDFs on the pooled sorted values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InvalidParameterError("ks_two_sample requires nonempty samples")
    if a.size < 10 or b.size < 10:
        raise InvalidParameterError("ks_two_sample requires at least 10 points per side")
    n, m = a.size, b.size
    pooled = np.concatenate([a, b])
    order = np.sort(pooled)
    fa = np.searchsorted(np.sort(a), order, side="right") / n
    fb = np.searchsorted(np.sort(b), order, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    lam = d * np.sqrt(n * m / (n + m))
    return d, kolmogorov_sf(lam)


def ks_one_sample_exp(sample: np.ndarray) -> tuple:
    """One-sample KS statistic and asymptotic p-value against Exp(1)."""
    v = np.sort(np.asarray(sample, dtype=float))
    n = v.size
    if n < 10:
        raise InvalidParameterError("need at least 10 points")
    cdf = -np.expm1(-v)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    return d, kolmogorov_sf(d * np.sqrt(n))


def ess(weights: np.ndarray) -> float:
    """Effective sample size (sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=float)
    s = w.sum()
    s2 = (w * w).sum()
    return float(s * s / s2) if s2 > 0 else 0.0


def ks_two_sample_weighted(
    a: np.ndarray,
    wa: Optional[np.ndarray],
    b: np.ndarray,
    wb: Optional[np.ndarray],
    n_boot: int = 0,
    seed: int = 0,
) -> dict:
    """Weighted KS comparison with an ESS-based asymptotic p-value.

    Weighted empirical CDFs are compared on the pooled support; each side's
    effective size is its ESS.  There is no exact weighted-KS theory, so the
    p-value is approximate; pass n_boot > 0 for a weighted-resampling
    bootstrap p-value alongside.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    wa = np.ones(a.size) if wa is None else np.asarray(wa, dtype=float)
    wb = np.ones(b.size) if wb is None else np.asarray(wb, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InvalidParameterError("weighted KS requires nonempty samples")

    def wcdf(x, w, grid):
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cw = np.cumsum(w[order])
        cw /= cw[-1]
        idx = np.searchsorted(xs, grid, side="right")
        return np.where(idx > 0, cw[np.clip(idx - 1, 0, len(cw) - 1)], 0.0)

    grid = np.sort(np.concatenate([a, b]))
    d = float(np.max(np.abs(wcdf(a, wa, grid) - wcdf(b, wb, grid))))
    na, nb = ess(wa), ess(wb)
    lam = d * np.sqrt(na * nb / (na + nb))
    out = {"D": d, "p": kolmogorov_sf(lam), "ess_a": na, "ess_b": nb}
    if n_boot:
        rng = philox(seed, 0xB007)
        pa = wa / wa.sum()
        pb = wb / wb.sum()
        count = 0
        na_i, nb_i = int(round(na)), int(round(nb))
        for _ in range(n_boot):
            ra = a[rng.choice(a.size, size=max(na_i, 10), p=pa)]
            rb = b[rng.choice(b.size, size=max(nb_i, 10), p=pb)]
            pooled = np.sort(np.concatenate([ra, rb]))
            fa = np.searchsorted(np.sort(ra), pooled, side="right") / ra.size
            fb = np.searchsorted(np.sort(rb), pooled, side="right") / rb.size
            if np.max(np.abs(fa - fb)) >= d:
                count += 1
        out["p_boot"] = (count + 1) / (n_boot + 1)
    return out


@dataclass
class BootstrapCI:
    mean: float
    se: float
    lo: float
    hi: float
    n_resamples: int


def bootstrap_ci(
    values: np.ndarray,
    seed: int = 0,
    n_resamples: int = 500,
    level: float = 0.99,
    weights: Optional[np.ndarray] = None,
) -> BootstrapCI:
    """Percentile bootstrap CI of the (weighted) mean, deterministic seeds."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InvalidParameterError("bootstrap_ci requires nonempty input")
    rng = philox(seed, 0xB5)
    if weights is None:
        mean = float(v.mean())
        idx = rng.integers(0, v.size, size=(n_resamples, v.size))
        means = v[idx].mean(axis=1)
    else:
        w = np.asarray(weights, dtype=float)
        mean = float((v * w).sum() / w.sum())
        idx = rng.integers(0, v.size, size=(n_resamples, v.size))
        means = (v[idx] * w[idx]).sum(axis=1) / w[idx].sum(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return BootstrapCI(mean=mean, se=float(means.std(ddof=1)), lo=float(lo),
                       hi=float(hi), n_resamples=n_resamples)


def mean_se(values: np.ndarray) -> tuple:
    """(mean, standard error) of an iid sample."""
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))
