"""Lamperti representation of the locally-largest size process, and the
independent Cauchy-weighted estimator of its law.

Z_a = z exp(xi(tau(a / |z|))) where tau inverts the exponential clock
int_0^s e^{xi(u)} du.  A start at z < 0 is the negative of the process
started at -z.  The weighted oracle estimates the same marginal law a third
way: symmetric Cauchy paths from x > 0, kept while every grid move
satisfies |eta_b| >= |delta eta_b|, reweighted by x^2 / eta_a^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import GridSpec
from .errors import InsufficientSampleError, InvalidParameterError
from .levy import LevyPath

__all__ = [
    "SsmpPath",
    "lamperti_Z",
    "cauchy_weighted_xi_oracle",
    "WeightedSample",
]


@dataclass
class SsmpPath:
    """The size process on a level grid, with its jump record.

    ``truncated`` flags level grids that outlive the simulated clock (the
    lifetime lies beyond the simulated horizon); Z values there are NaN.
    """

    z: float
    levels: np.ndarray
    Z: np.ndarray
    jumps: np.ndarray      # shape (k, 2): (level, dZ)
    zeta: float            # death level if detected, else +inf
    truncated: bool
    clock_checks: np.ndarray  # |int e^xi - a/|z|| at each grid level


def lamperti_Z(xi: LevyPath, z: float, levels: np.ndarray) -> SsmpPath:
    """Time-change a simulated xi path into the size process on ``levels``.

    The clock is the trapezoid cumulative of e^xi over the event grid
    (jump instants contribute zero-width segments, so cadlag values are
    respected); tau is inverted by linear interpolation inside the segment
    containing each requested level.
    """
    if z == 0:
        raise InvalidParameterError("initial value z must be nonzero")
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) < 0):
        raise InvalidParameterError("levels must be nondecreasing")
    sign = 1.0 if z > 0 else -1.0
    az = abs(z)
    ex = np.exp(xi.xi)
    gaps = np.diff(xi.times)
    seg = 0.5 * (ex[:-1] + ex[1:]) * gaps
    clock = np.concatenate([[0.0], np.cumsum(seg)])
    targets = levels / az
    total = clock[-1]
    Z = np.full(len(levels), np.nan)
    checks = np.full(len(levels), np.nan)
    idx = np.searchsorted(clock, targets, side="left")
    truncated = False
    for i, (tgt, k) in enumerate(zip(targets, idx)):
        if tgt > total:
            truncated = True
            continue
        k = min(max(k, 1), len(clock) - 1)
        c0, c1 = clock[k - 1], clock[k]
        if c1 > c0:
            fr = (tgt - c0) / (c1 - c0)
        else:
            fr = 1.0
        xi_at = xi.xi[k - 1] + fr * (xi.xi[k] - xi.xi[k - 1])
        Z[i] = sign * az * np.exp(xi_at)
        checks[i] = abs((c0 + fr * (c1 - c0)) - tgt)
    # jumps of xi map to jumps of Z at transformed levels
    if len(xi.jumps):
        jt = xi.jumps[:, 0]
        dy = xi.jumps[:, 1]
        pos = np.searchsorted(xi.times, jt, side="left")
        pos = np.clip(pos, 0, len(clock) - 1)
        jl = az * clock[pos]
        xi_pre = xi.xi[pos]  # pre-jump entry (first copy of the duplicated time)
        dZ = sign * az * np.exp(xi_pre) * np.expm1(dy)
        keep = jl <= levels[-1] + 1e-15 if len(levels) else np.ones(len(jl), bool)
        jumps = np.column_stack([jl[keep], dZ[keep]])
    else:
        jumps = np.empty((0, 2))
    return SsmpPath(
        z=z, levels=levels, Z=Z, jumps=jumps,
        zeta=np.inf, truncated=truncated, clock_checks=checks,
    )


@dataclass
class WeightedSample:
    """Weighted empirical law of the size process at grid levels, from the
    Cauchy route.  ``values`` holds eta at the final level for kept paths;
    ``path_values`` optionally the whole kept paths."""

    values: np.ndarray
    weights: np.ndarray
    n_raw: int
    rejection_rate: float
    dead_weight: float  # estimated probability mass of {already dead}
    path_values: Optional[np.ndarray] = None


def cauchy_weighted_xi_oracle(
    x: float,
    a: float,
    grid: GridSpec,
    rng: np.random.Generator,
    N: int,
    keep_paths: bool = False,
    batch: int = 4096,
) -> WeightedSample:
    """Estimate the law of the locally-largest size at levels <= a from x.

    Simulates N Cauchy paths (per-step scale twice the step) started at x,
    discards any path with a grid move larger in magnitude than the value it
    lands on, and weights survivors by x^2 / eta_a^2.  Kept paths started at
    x > 0 never become negative: a move from u > 0 to w <= 0 has magnitude
    u + |w| > |w| and is rejected by the constraint.
    """
    if not (x > 0):
        raise InvalidParameterError("starting point x must be > 0")
    if not (a > 0):
        raise InvalidParameterError("level a must be > 0")
    nsteps = max(1, int(np.ceil(a / grid.level_da)))
    h = a / nsteps
    kept_vals = []
    kept_paths = []
    n_kept = 0
    for start in range(0, N, batch):
        m = min(batch, N - start)
        eta = np.full(m, x)
        alive = np.ones(m, dtype=bool)
        traj = np.empty((nsteps + 1, m)) if keep_paths else None
        if keep_paths:
            traj[0] = eta
        for k in range(nsteps):
            u = rng.random(m)
            step = 2.0 * h * np.tan(np.pi * (u - 0.5))
            eta = eta + step
            alive &= np.abs(eta) >= np.abs(step)
            if keep_paths:
                traj[k + 1] = eta
        kept_vals.append(eta[alive])
        if keep_paths:
            kept_paths.append(traj[:, alive])
        n_kept += int(alive.sum())
    if n_kept == 0:
        raise InsufficientSampleError(
            f"all {N} Cauchy paths rejected", rejection_rate=1.0
        )
    vals = np.concatenate(kept_vals)
    w = (x * x) / vals**2
    return WeightedSample(
        values=vals,
        weights=w,
        n_raw=N,
        rejection_rate=1.0 - n_kept / N,
        dead_weight=max(0.0, 1.0 - float(w.sum()) / N),
        path_values=np.concatenate(kept_paths, axis=1) if keep_paths else None,
    )
