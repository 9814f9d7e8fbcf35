"""Closed-form and numerical identities: cumulant function, its roots, the
Cauchy-conditioned Laplace exponent, the interval Green function, and the
martingale / change-of-measure estimators.

Exact anchors used throughout the tests:

    kappa(2)  = -2/pi          kappa(3/2) = kappa(5/2) = 0
    kappa(q)  = -2 cos(pi q) Gamma(q-1) Gamma(3-q) / pi  on (1, 3)
    Phi+(q)   = kappa(q + 5/2) = -2 G(1/2-q) G(3/2+q) / (G(-q) G(1+q))
    R_C(z)    = (1/2pi) ln |(s+1)/(s-1)|,  s = sqrt((1+2z/C)/(1-2z/C))
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .config import LevyConfig
from .errors import DomainError, InsufficientSampleError, NumericFailureError
from .levy import TWO_OVER_PI, psi
from .stats import BootstrapCI, bootstrap_ci, ess, ks_two_sample_weighted


def _kappa_integral(q: float) -> float:
    """int_{-ln 2}^{0} (1 - e^y)^q  L(dy)  for q > 1.

    Substituting w = 1 - e^y gives (2/pi) int_0^{1/2} w^{q-2} (1-w)^{-2} dw,
    expanded as the geometric series sum (k+1) (1/2)^{q-1+k} / (q-1+k):
    the ratio-1/2 series is summed to machine precision.
    """
    if q <= 1.0:
        raise DomainError(f"cumulant integral needs q > 1, got {q}")
    k = np.arange(220)
    return TWO_OVER_PI * float(np.sum((k + 1) * 0.5 ** (q - 1 + k) / (q - 1 + k)))


def kappa(q: float, cfg: Optional[LevyConfig] = None) -> float:
    """Cumulant function of the positive growth-fragmentation: psi(q) plus
    the binding term over negative jumps.  Domain (1, 3)."""
    if q >= 3.0:
        raise DomainError(f"kappa is defined for q < 3, got {q}")
    return psi(q, cfg) + _kappa_integral(q)


def kappa_signed(q: float, cfg: Optional[LevyConfig] = None) -> float:
    """Cumulant of the signed system: psi(q) + int |1-e^y|^q L(dy) over the
    whole support.  Has a double root at q = 2 (criticality)."""
    if q >= 3.0:
        raise DomainError(f"kappa_signed is defined for q < 3, got {q}")
    from scipy.integrate import quad

    def f(y):
        em1 = np.expm1(y)
        return np.abs(em1) ** q * TWO_OVER_PI * np.exp(-y) / em1**2

    a, _ = quad(f, -np.log(2.0) + 1e-14, -1e-12, limit=200)
    b, _ = quad(f, 1e-12, 60.0, limit=200)
    return psi(q, cfg) + a + b


def kappa_closed(q) -> float:
    """Closed form -2 cos(pi q) Gamma(q-1) Gamma(3-q) / pi on (1, 3).

    Half-integer q (cosine zeros) return exactly 0; q = 2 is regular and
    gives -2/pi."""
    arr = np.asarray(q, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any((arr <= 1.0) | (arr >= 3.0)):
        raise DomainError("kappa_closed is defined on (1, 3)")
    out = np.empty_like(arr)
    half = np.abs(2.0 * arr - np.round(2.0 * arr)) < 1e-15
    odd_half = half & (np.round(2.0 * arr).astype(int) % 2 == 1)
    reg = ~odd_half
    out[odd_half] = 0.0
    out[reg] = -2.0 * np.cos(np.pi * arr[reg]) / np.pi * special.gamma(
        arr[reg] - 1.0
    ) * special.gamma(3.0 - arr[reg])
    return float(out[0]) if scalar else out


def phi_plus(q) -> float:
    """Laplace exponent of the symmetric Cauchy process conditioned to stay
    positive: -2 G(1/2-q) G(3/2+q) / (G(-q) G(1+q)) on (-3/2, 1/2).

    Poles of the denominator are handled through reciprocal gammas, so
    phi_plus(0) = 0 exactly."""
    arr = np.asarray(q, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any((arr <= -1.5) | (arr >= 0.5)):
        raise DomainError("phi_plus is defined on (-3/2, 1/2)")
    out = (
        -2.0
        * special.gamma(0.5 - arr)
        * special.gamma(1.5 + arr)
        * special.rgamma(-arr)
        * special.rgamma(1.0 + arr)
    )
    return float(out[0]) if scalar else out


def find_roots(cfg: Optional[LevyConfig] = None, tol: float = 1e-8) -> tuple:
    """Roots of the numeric kappa, by bisection on (1, 2) and (2, 3)."""

    def bisect(lo, hi):
        flo, fhi = kappa(lo, cfg), kappa(hi, cfg)
        if flo * fhi > 0:
            raise NumericFailureError(
                f"no sign change of kappa on [{lo}, {hi}]: quadrature misconfigured?"
            )
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fm = kappa(mid, cfg)
            if flo * fm <= 0:
                hi, fhi = mid, fm
            else:
                lo, flo = mid, fm
        return 0.5 * (lo + hi)

    return bisect(1.05, 2.0), bisect(2.0, 2.95)


@dataclass
class CumulantGrid:
    q: np.ndarray
    kappa_numeric: np.ndarray
    kappa_closed: np.ndarray
    phi_q: np.ndarray
    phi_plus: np.ndarray
    omega_minus: float
    omega_plus: float
    max_abs_diff: float


def cumulant_grid(
    q_lo: float = 1.1, q_hi: float = 2.9, n: int = 19, cfg: Optional[LevyConfig] = None
) -> CumulantGrid:
    """Numeric-vs-closed cumulant comparison grid plus roots and Phi+."""
    q = np.linspace(q_lo, q_hi, n)
    kn = np.array([kappa(v, cfg) for v in q])
    kc = np.array([kappa_closed(v) for v in q])
    om, op = find_roots(cfg)
    phi_q = np.linspace(-1.2, 0.3, 7)
    return CumulantGrid(
        q=q, kappa_numeric=kn, kappa_closed=kc,
        phi_q=phi_q, phi_plus=np.array([phi_plus(v) for v in phi_q]),
        omega_minus=om, omega_plus=op,
        max_abs_diff=float(np.max(np.abs(kn - kc))),
    )


def green_RC(z: float, C: float) -> float:
    """Green function at 0 of the doubled symmetric Cauchy process killed
    outside (-C/2, C/2), evaluated at z with |z| <= C/2.

    Even in z, decreasing in |z|, 0 at the boundary, +inf at z = 0."""
    if not (C > 0):
        raise DomainError("C must be > 0")
    if abs(z) > C / 2.0:
        raise DomainError(f"green_RC requires |z| <= C/2, got z={z}, C={C}")
    if z == 0.0:
        return np.inf
    zt = 2.0 * z / C
    if abs(abs(zt) - 1.0) < 1e-300:
        return 0.0
    s = np.sqrt((1.0 + zt) / (1.0 - zt)) if zt < 1.0 else np.inf
    if not np.isfinite(s):
        return 0.0
    if s == 0.0:
        return 0.0
    return float(-(np.log(abs(s - 1.0)) - np.log(abs(s + 1.0))) / (2.0 * np.pi))


@dataclass
class MartingaleReport:
    a: float
    z: float
    target: float
    mean: float
    ci: BootstrapCI
    n: int
    frac_alive: float
    vacuous: bool


def estimate_M_a(
    frag_sq_sums: np.ndarray, z: float, a: float, seed: int = 0
) -> MartingaleReport:
    """Summarize per-excursion sums of squared fragment sizes at level a.

    Each entry is Sum_i |size_i|^2 over the fragments above a of one
    excursion (0 when the excursion never reaches a); the martingale
    property pins the mean at z^2.
    """
    v = np.asarray(frag_sq_sums, dtype=float)
    ci = bootstrap_ci(v, seed=seed)
    alive = float(np.mean(v > 0))
    return MartingaleReport(
        a=a, z=z, target=z * z, mean=float(v.mean()), ci=ci, n=v.size,
        frac_alive=alive, vacuous=alive == 0.0,
    )


@dataclass
class MuCheckReport:
    a: float
    z: float
    mean_weight: float
    mean_weight_se: float
    ess: float
    ks: dict
    n_gamma: int
    n_spine: int


def mu_z_check(
    x_at_level: np.ndarray,
    weights: np.ndarray,
    spine_x_at_level: np.ndarray,
    z: float,
    a: float,
    seed: int = 0,
    min_ess: float = 100.0,
    n_boot: int = 200,
) -> MuCheckReport:
    """Weighted two-sample comparison behind the change of measure.

    The excursion-side marginal x(T_a), reweighted by M_a / z^2, must match
    the first-hit marginal of the spine law (Brownian real part at the BES3
    part's first crossing of a).  Excursions that never reach a carry weight
    0 and a NaN marginal; they drop out of the weighted CDF.
    """
    w = np.asarray(weights, dtype=float)
    xv = np.asarray(x_at_level, dtype=float)
    keep = w > 0
    if ess(w[keep]) < min_ess:
        raise InsufficientSampleError(
            f"effective sample size {ess(w[keep]):.1f} below {min_ess}",
            rejection_rate=float(1.0 - keep.mean()),
        )
    mw = float(w.mean())
    mse = float(w.std(ddof=1) / np.sqrt(w.size))
    ks = ks_two_sample_weighted(
        xv[keep], w[keep], np.asarray(spine_x_at_level, dtype=float), None,
        n_boot=n_boot, seed=seed,
    )
    return MuCheckReport(
        a=a, z=z, mean_weight=mw, mean_weight_se=mse, ess=ess(w[keep]),
        ks=ks, n_gamma=int(xv.size), n_spine=int(len(spine_x_at_level)),
    )
