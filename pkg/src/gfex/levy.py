"""The driving Levy process: jump density, Laplace exponent, exact tail
functionals and simulation.

The jump measure has density (2/pi) e^{-y} / (e^y - 1)^2 on y > -ln 2.  It
integrates y^2 near 0 like a Cauchy measure (~ (2/pi) y^{-2}), so jumps
below a cutoff eps are replaced by a Brownian motion whose per-unit-time
mean and variance match the compensated small-jump part exactly to second
order, while jumps above eps form a compound Poisson train sampled by
inverse CDF.  The Laplace exponent

    Psi(q) = -(4/pi) q + int_{y > -ln 2} (e^{qy} - 1 - q(e^y - 1)) L(dy),
    q < 3,

is evaluated by adaptive quadrature with a series patch across the
removable singularity at 0.  Both tail masses of L and the compensator
integral of e^y - 1 admit closed forms, which the sampler uses and the
tests cross-check against quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .config import LN2, LevyConfig
from .errors import DomainError, InvalidParameterError

TWO_OVER_PI = 2.0 / np.pi
FOUR_OVER_PI = 4.0 / np.pi


def levy_density(y):
    """Jump density (2/pi) e^{-y} / (e^y - 1)^2 for y > -ln 2, else 0.

    y = 0 returns +inf by convention (the non-integrable point of the
    density; downstream users always compensate across 0).
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = y > -LN2
    with np.errstate(divide="ignore", over="ignore"):
        em1 = np.expm1(y[inside])
        vals = TWO_OVER_PI * np.exp(-y[inside]) / em1**2
    out[inside] = vals
    out[np.asarray(y == 0.0)] = np.inf
    return out if out.ndim else float(out)


def tail_mass_pos(y0: float) -> float:
    """L((y0, inf)) for y0 > 0, in closed form."""
    x = np.expm1(y0)
    return TWO_OVER_PI * (1.0 / x + 1.0 / (1.0 + x) + 2.0 * np.log(x / (1.0 + x)))


def tail_mass_neg(y1: float) -> float:
    """L((-ln 2, y1)) for -ln 2 < y1 < 0, in closed form."""
    u = -np.expm1(y1)  # u = 1 - e^{y1} in (0, 1/2)
    return TWO_OVER_PI * (1.0 / u - 1.0 / (1.0 - u) + 2.0 * np.log((1.0 - u) / u))


def jump_rate(eps: float) -> float:
    """Total rate of jumps with |y| > eps."""
    if not (0 < eps < LN2):
        raise InvalidParameterError("eps must lie in (0, ln 2)")
    return tail_mass_pos(eps) + tail_mass_neg(-eps)


def compensator_tail(eps: float) -> float:
    """int_{|y|>eps} (e^y - 1) L(dy) = (2/pi)(eps + 2 sinh(eps) - 2)."""
    return TWO_OVER_PI * (eps + 2.0 * np.sinh(eps) - 2.0)


def small_jump_moments(eps: float, tol: float = 1e-12) -> tuple:
    """(variance, mean-correction) of the compensated small-jump part:

    sigma^2 = int_{|y|<=eps} y^2 L(dy),   mu = int_{|y|<=eps} (y - (e^y-1)) L(dy).

    Both integrands extend continuously across 0 ((2/pi) and -(1/pi) resp.).
    """

    def f_var(y):
        if abs(y) < 1e-8:
            return TWO_OVER_PI * (1.0 - 2.0 * y)
        em1 = np.expm1(y)
        return TWO_OVER_PI * y * y * np.exp(-y) / em1**2

    def f_mu(y):
        if abs(y) < 1e-6:
            return TWO_OVER_PI * (-0.5 + y / 2.0)  # (y-(e^y-1))/y^2 -> -1/2, next order
        em1 = np.expm1(y)
        return TWO_OVER_PI * (y - em1) * np.exp(-y) / em1**2

    s2, _ = quad(f_var, -eps, eps, points=[0.0], limit=200, epsabs=tol, epsrel=1e-10)
    mu, _ = quad(f_mu, -eps, eps, points=[0.0], limit=200, epsabs=tol, epsrel=1e-10)
    return s2, mu


def _psi_integrand_small(y, q):
    em1 = np.expm1(y)
    return TWO_OVER_PI * (np.exp(q * y) - 1.0 - q * em1) * np.exp(-y) / em1**2


def _psi_integrand_large(y, q):
    # stable for y >= 1: (e^{(q-3)y} + (q-1) e^{-3y} - q e^{-2y}) / (1 - e^{-y})^2
    den = -np.expm1(-y)
    return (
        TWO_OVER_PI
        * (np.exp((q - 3.0) * y) + (q - 1.0) * np.exp(-3.0 * y) - q * np.exp(-2.0 * y))
        / den**2
    )


def psi(q: float, cfg: Optional[LevyConfig] = None) -> float:
    """Laplace exponent of the driving Levy process, for q < 3.

    Exact reference values: psi(0) = 0, psi(1) = psi(2) = -4/pi,
    psi(-1) = 8/pi; psi diverges to +inf as q -> 3-.
    """
    if q >= 3.0:
        raise DomainError(f"psi is defined for q < 3, got {q}")
    if cfg is None:
        cfg = LevyConfig()
    tol = cfg.quadrature_tol
    if q == 0.0:
        return 0.0
    y0 = 1e-4
    # series patch across the removable singularity: the compensated
    # integrand equals (2/pi)[(q^2-q)/2 + c1 y + c2 y^2 + O(y^3)]; odd terms
    # vanish on the symmetric interval.
    c2 = (q**4 - q) / 24.0 - (q**3 - q) / 3.0 + (q * q - q) * (23.0 / 24.0)
    patch = TWO_OVER_PI * ((q * q - q) * y0 + c2 * (2.0 / 3.0) * y0**3)
    a, _ = quad(_psi_integrand_small, -LN2 + 1e-14, -y0, args=(q,),
                limit=300, epsabs=tol, epsrel=1e-12)
    b, _ = quad(_psi_integrand_small, y0, 1.0, args=(q,),
                limit=300, epsabs=tol, epsrel=1e-12)
    c, _ = quad(_psi_integrand_large, 1.0, np.inf, args=(q,),
                limit=300, epsabs=tol, epsrel=1e-12)
    return -FOUR_OVER_PI * q + a + b + c + patch


def psi_prime(q: float, cfg: Optional[LevyConfig] = None, h: float = 1e-6) -> float:
    """Central finite difference of psi (used for moment checks)."""
    return (psi(q + h, cfg) - psi(q - h, cfg)) / (2.0 * h)


# ---------------------------------------------------------------------------
# Master inverse-CDF tables in tail-mass coordinates.
#
# One pair of tables covers every cutoff eps: sampling a jump with |y| > eps
# means drawing a uniform tail mass in (0, tail_mass(eps)) and mapping it
# through the inverse.  The tables are uniform in log(mass), so lookups are
# O(1) interpolations; beyond the tabulated range the known asymptotic tails
# (e^{-3y} on the right, linear approach to -ln 2 on the left) take over.
# ---------------------------------------------------------------------------

TABLE_SIZE = 16384
_M_MIN = 1e-9
_Y_POS_MIN = 1e-8
_U_NEG_MIN = 1e-8


@dataclass(frozen=True)
class JumpTables:
    s0_pos: float      # log-mass at table start (largest mass)
    ds_pos: float      # negative step in log-mass
    y_pos: np.ndarray  # jump value at uniform log-mass grid
    s0_neg: float
    ds_neg: float
    y_neg: np.ndarray
    eps_grid: np.ndarray   # log-spaced cutoffs for the small-jump moments
    sig2_grid: np.ndarray
    mu_grid: np.ndarray


@lru_cache(maxsize=1)
def jump_tables() -> JumpTables:
    # positive side: y from just above 0 out past the last tabulated mass
    # (masses below _M_MIN use the analytic e^{-3y} tail, so y_max = 8 is
    # ample; beyond that the closed form cancels catastrophically).
    y = np.geomspace(_Y_POS_MIN, 8.0, 4 * TABLE_SIZE)
    m = np.array([tail_mass_pos(v) for v in y])
    m = np.minimum.accumulate(np.maximum(m, 1e-300))
    s = np.log(m)[::-1]           # increasing in log-mass
    yrev = y[::-1]
    s_uniform = np.linspace(np.log(_M_MIN), s[-1], TABLE_SIZE)
    y_pos = np.interp(s_uniform, s, yrev)
    s0_pos, ds_pos = s_uniform[0], s_uniform[1] - s_uniform[0]

    # negative side: parametrized by u = 1 - e^y in (0, 1/2)
    u = 0.5 - np.geomspace(1e-12, 0.5 - _U_NEG_MIN, 4 * TABLE_SIZE)[::-1]
    u = np.clip(u, _U_NEG_MIN, 0.5 - 1e-12)
    yneg = np.log1p(-u)
    mneg = np.array([tail_mass_neg(v) for v in yneg])
    order = np.argsort(mneg)
    sneg = np.log(mneg[order])
    yneg_sorted = yneg[order]
    s_uniform_n = np.linspace(np.log(_M_MIN), sneg[-1], TABLE_SIZE)
    y_neg = np.interp(s_uniform_n, sneg, yneg_sorted)
    s0_neg, ds_neg = s_uniform_n[0], s_uniform_n[1] - s_uniform_n[0]

    eps_grid = np.geomspace(1e-6, 0.5, 512)
    sig2 = np.empty_like(eps_grid)
    mu = np.empty_like(eps_grid)
    for i, e in enumerate(eps_grid):
        sig2[i], mu[i] = small_jump_moments(e)
    return JumpTables(s0_pos, ds_pos, y_pos, s0_neg, ds_neg, y_neg,
                      np.log(eps_grid), sig2, mu)


def invert_jump_pos(mass, tables: Optional[JumpTables] = None):
    """Positive jump value with tail mass `mass` (vectorized)."""
    t = tables or jump_tables()
    s = np.log(mass)
    idx = (s - t.s0_pos) / t.ds_pos
    below = idx < 0
    idx = np.clip(idx, 0, len(t.y_pos) - 1 - 1e-9)
    i0 = np.floor(idx).astype(np.int64)
    fr = idx - i0
    y = t.y_pos[i0] * (1 - fr) + t.y_pos[np.minimum(i0 + 1, len(t.y_pos) - 1)] * fr
    # analytic tail: mass ~ (2/(3 pi)) e^{-3y}  =>  dy/dlog(mass) = -1/3
    y = np.where(below, t.y_pos[0] + (t.s0_pos - s) / 3.0, y)
    return y


def invert_jump_neg(mass, tables: Optional[JumpTables] = None):
    """Negative jump value (in (-ln 2, 0)) with left tail mass `mass`."""
    t = tables or jump_tables()
    s = np.log(mass)
    idx = (s - t.s0_neg) / t.ds_neg
    below = idx < 0
    idx = np.clip(idx, 0, len(t.y_neg) - 1 - 1e-9)
    i0 = np.floor(idx).astype(np.int64)
    fr = idx - i0
    y = t.y_neg[i0] * (1 - fr) + t.y_neg[np.minimum(i0 + 1, len(t.y_neg) - 1)] * fr
    # near -ln2 the mass is ~ (32/pi) (1/2 - u): approach linearly
    u_tail = 0.5 - np.exp(s) * np.pi / 32.0
    y = np.where(below, np.log1p(-u_tail), y)
    return y


@dataclass
class LevyPath:
    """Cadlag path on event times.  Jump instants appear twice in `times`
    (pre and post value), so trapezoid integrals over segments are exact
    with respect to the representation."""

    times: np.ndarray
    xi: np.ndarray
    jumps: np.ndarray  # shape (k, 2): (time, dy)
    eps: float
    drift: float
    sigma: float


def levy_increment_params(cfg: LevyConfig) -> tuple:
    """(drift, sigma, lam) of the eps-approximation, matching the Laplace
    exponent to second order at 0 for the replaced small jumps."""
    s2, mu = small_jump_moments(cfg.eps)
    drift = -FOUR_OVER_PI - compensator_tail(cfg.eps) + mu
    return drift, np.sqrt(s2), jump_rate(cfg.eps)


def sample_levy_xi(
    horizon: float,
    cfg: LevyConfig,
    rng: np.random.Generator,
) -> LevyPath:
    """Simulate xi on [0, horizon]: Poisson jumps above eps plus matched
    drift/Brownian replacement of the compensated small jumps."""
    if not (horizon > 0):
        raise InvalidParameterError("horizon must be > 0")
    drift, sigma, lam = levy_increment_params(cfg)
    mp = tail_mass_pos(cfg.eps)
    mn = tail_mass_neg(-cfg.eps)
    n_j = rng.poisson(lam * horizon)
    jt = np.sort(rng.random(n_j) * horizon)
    pos = rng.random(n_j) < mp / (mp + mn)
    mass = rng.random(n_j)
    dy = np.where(pos, invert_jump_pos(np.maximum(mass * mp, 1e-300)),
                  invert_jump_neg(np.maximum(mass * mn, 1e-300)))
    # event grid: jump times plus regular points every cfg.dt
    ngrid = int(np.ceil(horizon / cfg.dt))
    tgrid = np.linspace(0.0, horizon, ngrid + 1)
    t_all = np.concatenate([tgrid, jt, jt])  # jumps duplicated: pre + post
    order = np.argsort(t_all, kind="stable")
    t_all = t_all[order]
    is_post = np.zeros(len(t_all), dtype=bool)
    # mark the second copy of each jump time as the post-jump entry
    jump_val = np.zeros(len(t_all))
    seen = {}
    for k, idx in enumerate(order):
        if idx >= len(tgrid):
            j = (idx - len(tgrid)) % n_j
            if j in seen:
                is_post[k] = True
                jump_val[k] = dy[j]
            else:
                seen[j] = k
    gaps = np.diff(t_all)
    bm = np.zeros(len(t_all))
    pos_gap = gaps > 0
    inc = np.zeros(len(gaps))
    inc[pos_gap] = drift * gaps[pos_gap] + sigma * np.sqrt(gaps[pos_gap]) * rng.standard_normal(
        int(pos_gap.sum())
    )
    xi = np.empty(len(t_all))
    xi[0] = 0.0
    np.cumsum(inc + jump_val[1:], out=xi[1:])
    jumps = np.column_stack([jt, dy]) if n_j else np.empty((0, 2))
    return LevyPath(times=t_all, xi=xi, jumps=jumps, eps=cfg.eps, drift=drift, sigma=sigma)


def sample_xi_terminal(
    t: float, cfg: LevyConfig, rng: np.random.Generator, n: int
) -> np.ndarray:
    """n independent terminal values xi_t (no path), vectorized."""
    drift, sigma, lam = levy_increment_params(cfg)
    mp = tail_mass_pos(cfg.eps)
    mn = tail_mass_neg(-cfg.eps)
    counts = rng.poisson(lam * t, size=n)
    total = int(counts.sum())
    pos = rng.random(total) < mp / (mp + mn)
    mass = rng.random(total)
    dy = np.where(pos, invert_jump_pos(np.maximum(mass * mp, 1e-300)),
                  invert_jump_neg(np.maximum(mass * mn, 1e-300)))
    ids = np.repeat(np.arange(n), counts)
    jump_sum = np.bincount(ids, weights=dy, minlength=n)
    return drift * t + sigma * np.sqrt(t) * rng.standard_normal(n) + jump_sum
