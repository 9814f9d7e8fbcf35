"""Path-level samplers: durations, pinned bridges, excursions, Cauchy paths
and half-plane spine excursions.

The excursion law with endpoint z is realized as a random-duration pair
(one-dimensional Brownian bridge 0 -> z, independent BES3 bridge 0 -> 0):
the duration is r = z^2 / (2 W) with W a unit-mean exponential, the bridge
pair is sampled exactly on the grid, and the two are independent given r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import GridSpec
from .errors import InvalidParameterError
from .rng import philox

# Stream tags keeping sub-draws of one replica independent of each other.
_T_DURATION = 11
_T_XBRIDGE = 12
_T_YBRIDGE = 13
_T_CAUCHY = 14
_T_HEXC = 15


@dataclass
class ExcursionPath:
    """A discretized planar excursion pinned at a real endpoint.

    x runs from 0 to z exactly; y is 0 at both ends and positive inside.
    ``ycomp`` optionally keeps the three bridge components of y so the path
    can be refined in place (grid halving with the same law).
    """

    z: float
    duration: float
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dt: float
    ycomp: Optional[np.ndarray] = None  # shape (3, n) components of y

    @property
    def n(self) -> int:
        return len(self.times)


@dataclass
class CauchyPath:
    """A symmetric Cauchy path on a uniform grid with recorded large moves."""

    start: float
    times: np.ndarray
    values: np.ndarray
    jumps: np.ndarray  # shape (k, 2): (time, increment) above the threshold
    jump_threshold: float


@dataclass
class HExcursionPath:
    """Half-plane spine path: Brownian real part, independent BES3 imaginary
    part from 0, stopped at the first grid crossing of a target level."""

    start: float
    a: float
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    hit_time: float  # level-crossing time, linearly interpolated
    x_at_hit: float
    truncated: bool


def grid_times(r: float, dt: float) -> np.ndarray:
    """Uniform multiples of dt on [0, r], keeping the final partial step so
    the last time equals r exactly."""
    if not (r > 0):
        raise InvalidParameterError(f"duration must be > 0, got {r}")
    n_full = int(np.floor(r / dt))
    t = np.arange(n_full + 1, dtype=np.float64) * dt
    if r - t[-1] > 1e-12 * max(r, dt):
        t = np.append(t, r)
    else:
        t[-1] = r
    return t


def sample_duration(z: float, rng: np.random.Generator, size: Optional[int] = None):
    """Excursion duration(s) for endpoint z: r = z^2 / (2 W), W ~ Exp(1).

    The exponential change of variables is exact for the duration density
    e^{-1/(2v)} / (2 v^2) dv of v = r / z^2.
    """
    if z == 0:
        raise InvalidParameterError("endpoint z must be nonzero")
    w = rng.standard_exponential(size=size)
    w = np.where(w > 0, w, np.finfo(float).tiny) if size is not None else (w or np.finfo(float).tiny)
    return z * z / (2.0 * w)


def sample_brownian_bridge(
    r: float, endpoint: float, times: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Brownian bridge from 0 to ``endpoint`` over [0, r], exact in law on
    any grid: unpinned increments plus the linear pinning correction."""
    if not (r > 0):
        raise InvalidParameterError(f"bridge length must be > 0, got {r}")
    dts = np.diff(times)
    b = np.empty(len(times))
    b[0] = 0.0
    np.cumsum(rng.standard_normal(len(dts)) * np.sqrt(dts), out=b[1:])
    b += (times / r) * (endpoint - b[-1])
    b[0] = 0.0
    b[-1] = endpoint
    return b


def sample_bessel3_bridge(
    r: float,
    times: np.ndarray,
    rng: np.random.Generator,
    return_components: bool = False,
):
    """BES3 bridge of length r from 0 to 0, as the Euclidean norm of three
    independent Brownian bridges (avoids SDE discretization bias)."""
    if not (r > 0):
        raise InvalidParameterError(f"bridge length must be > 0, got {r}")
    comp = np.empty((3, len(times)))
    for i in range(3):
        comp[i] = sample_brownian_bridge(r, 0.0, times, rng)
    y = np.sqrt(comp[0] ** 2 + comp[1] ** 2 + comp[2] ** 2)
    if return_components:
        return y, comp
    return y


def sample_excursion(
    z: float,
    grid: GridSpec,
    keep_components: bool = False,
    max_points: Optional[int] = None,
    duration: Optional[float] = None,
) -> ExcursionPath:
    """One excursion with endpoint z on the (seed, replica_index) stream.

    ``max_points`` coarsens dt for exceptionally long durations so a single
    heavy-tailed draw cannot exhaust memory; the effective dt is recorded.
    """
    if z == 0:
        raise InvalidParameterError("endpoint z must be nonzero")
    if duration is None:
        rng_r = philox(grid.seed, _T_DURATION, grid.replica_index)
        r = float(sample_duration(z, rng_r))
    else:
        r = float(duration)
    dt = grid.dt
    if max_points is not None and r / dt > max_points - 2:
        dt = r / (max_points - 2)
    t = grid_times(r, dt)
    n = len(t)
    rng = philox(grid.seed, _T_XBRIDGE, grid.replica_index)
    # one bulk draw for the x bridge and the three y components
    g = rng.standard_normal((4, n - 1))
    sdt = np.sqrt(np.diff(t))
    paths = np.empty((4, n))
    paths[:, 0] = 0.0
    np.cumsum(g * sdt, axis=1, out=paths[:, 1:])
    ends = np.array([z, 0.0, 0.0, 0.0])
    paths += (t / r) * (ends - paths[:, -1])[:, None]
    paths[:, 0] = 0.0
    paths[:, -1] = ends
    x = paths[0]
    comp = paths[1:]
    y = np.sqrt(comp[0] ** 2 + comp[1] ** 2 + comp[2] ** 2)
    return ExcursionPath(
        z=z, duration=r, times=t, x=x, y=y, dt=dt,
        ycomp=np.ascontiguousarray(comp) if keep_components else None,
    )


def refine_excursion(path: ExcursionPath, rng: np.random.Generator) -> ExcursionPath:
    """Halve the grid of an excursion by conditional midpoint insertion.

    Inserting N(mean of neighbours, gap/4) midpoints into a Brownian bridge
    yields the same bridge law on the finer grid, so a coarse path and its
    refinement form a common-random-numbers pair for bias studies.  Requires
    the path to carry its y components.
    """
    if path.ycomp is None:
        raise InvalidParameterError("refinement requires keep_components=True")
    t = path.times
    tm = 0.5 * (t[:-1] + t[1:])
    gaps = np.diff(t)
    sd = 0.5 * np.sqrt(gaps)

    def mid(series):
        m = 0.5 * (series[:-1] + series[1:]) + sd * rng.standard_normal(len(tm))
        out = np.empty(len(t) + len(tm))
        out[0::2] = series
        out[1::2] = m
        return out

    new_t = np.empty(len(t) + len(tm))
    new_t[0::2] = t
    new_t[1::2] = tm
    new_x = mid(path.x)
    new_comp = np.vstack([mid(c) for c in path.ycomp])
    new_y = np.sqrt((new_comp**2).sum(axis=0))
    return ExcursionPath(
        z=path.z, duration=path.duration, times=new_t, x=new_x, y=new_y,
        dt=path.dt / 2.0, ycomp=new_comp,
    )


def sample_cauchy_path(
    start: float,
    horizon: float,
    grid: GridSpec,
    rng: Optional[np.random.Generator] = None,
    jump_threshold: Optional[float] = None,
) -> CauchyPath:
    """Symmetric Cauchy path with E e^{i q (eta_t - eta_0)} = e^{-2 t |q|}.

    Per-step increments over h are Cauchy with scale 2h via the inverse CDF
    2h tan(pi (U - 1/2)).  Increments larger than the reporting threshold
    (default 10 sqrt(step)) are recorded as jumps.
    """
    if not (horizon > 0):
        raise InvalidParameterError("horizon must be > 0")
    if rng is None:
        rng = philox(grid.seed, _T_CAUCHY, grid.replica_index)
    t = grid_times(horizon, grid.level_da)
    h = np.diff(t)
    u = rng.random(len(h))
    inc = 2.0 * h * np.tan(np.pi * (u - 0.5))
    vals = np.empty(len(t))
    vals[0] = start
    np.cumsum(inc, out=vals[1:])
    vals[1:] += start
    thr = 10.0 * np.sqrt(grid.level_da) if jump_threshold is None else jump_threshold
    big = np.abs(inc) > thr
    jumps = np.column_stack([t[1:][big], inc[big]]) if big.any() else np.empty((0, 2))
    return CauchyPath(start=start, times=t, values=vals, jumps=jumps, jump_threshold=thr)


def sample_h_excursion(
    start: float,
    a: float,
    grid: GridSpec,
    rng: Optional[np.random.Generator] = None,
    max_steps: int = 50_000_000,
) -> HExcursionPath:
    """Spine path run until its imaginary part first crosses level a.

    x is a Brownian path from ``start``; y is the norm of a 3D Brownian
    motion from 0 (a BES3 process), independent of x.  The BES3 process hits
    a almost surely; a hard step cap guards the loop and is reported.
    """
    if not (a > 0):
        raise InvalidParameterError("target level a must be > 0")
    if rng is None:
        rng = philox(grid.seed, _T_HEXC, grid.replica_index)
    dt = grid.dt
    sdt = np.sqrt(dt)
    chunk = max(256, int(2 * (a * a / 3.0) / dt))
    xs = [np.array([start])]
    ws = [np.zeros((3, 1))]
    y_last = 0.0
    x_last = start
    w_last = np.zeros(3)
    n_done = 0
    hit_idx = None
    while hit_idx is None and n_done < max_steps:
        m = min(chunk, max_steps - n_done)
        dw = rng.standard_normal((3, m)) * sdt
        w = w_last[:, None] + np.cumsum(dw, axis=1)
        y = np.sqrt((w**2).sum(axis=0))
        dx = rng.standard_normal(m) * sdt
        x = x_last + np.cumsum(dx)
        over = np.nonzero(y >= a)[0]
        if over.size:
            k = over[0]
            xs.append(x[: k + 1])
            ws.append(w[:, : k + 1])
            hit_idx = n_done + k + 1
        else:
            xs.append(x)
            ws.append(w)
        x_last = x[-1] if m else x_last
        w_last = w[:, -1] if m else w_last
        n_done += m
    x = np.concatenate(xs)
    w = np.concatenate(ws, axis=1)
    y = np.sqrt((w**2).sum(axis=0))
    t = np.arange(len(x)) * dt
    truncated = hit_idx is None
    if truncated:
        hit_time = t[-1]
        x_hit = x[-1]
    else:
        # interpolate the crossing inside the final step
        y0, y1 = y[-2], y[-1]
        frac = (a - y0) / (y1 - y0) if y1 > y0 else 1.0
        hit_time = t[-2] + frac * dt
        x_hit = x[-2] + frac * (x[-1] - x[-2])
    return HExcursionPath(
        start=start, a=a, times=t, x=x, y=y,
        hit_time=float(hit_time), x_at_hit=float(x_hit), truncated=truncated,
    )
