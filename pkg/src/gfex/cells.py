"""The branching cell system driven by the Lamperti size process.

Two routes are provided on purpose:

* an explicit object-building route (``simulate_cell_system`` and friends)
  that stitches Levy paths per cell and keeps every cell's whole size path
  -- meant for desk-scale inspection, exports and cross-validation;
* flat numba batch drivers (``run_snapshot_batch`` etc.) that simulate many
  systems without materializing them, used by the Monte Carlo experiments.

Both derive child randomness from (parent key, birth index), so subtrees
are reproducible independently of their siblings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .config import LN2, LevyConfig, TruncationSpec
from .errors import InvalidParameterError
from .levy import jump_tables, sample_levy_xi
from .rng import derive_key, philox
from .ssmp import lamperti_Z
from .analytics import green_RC

_T_CELL = 21


# ---------------------------------------------------------------------------
# Explicit route
# ---------------------------------------------------------------------------


@dataclass
class CellRecord:
    label: Tuple[int, ...]        # () is the Eve cell; children ranked by |size|
    birth_level: float            # absolute level b_u
    size0: float                  # signed birth size
    zeta: float                   # simulated lifetime in levels (age units)
    censored: bool                # stopped by the horizon, not by death
    ages: np.ndarray              # age grid (levels since birth)
    values: np.ndarray            # signed size path on the age grid
    jump_ages: np.ndarray         # ages of recorded jumps
    jump_sizes: np.ndarray        # signed size jumps of this cell's path


@dataclass
class CellSystem:
    z: float
    cells: List[CellRecord]
    truncation: TruncationSpec
    horizon: float
    seed: int

    def cell(self, label: Tuple[int, ...]) -> CellRecord:
        for c in self.cells:
            if c.label == label:
                return c
        raise KeyError(label)


@dataclass
class Snapshot:
    level: float
    sizes: np.ndarray
    labels: List[Tuple[int, ...]]


@dataclass
class BrwReport:
    n: int
    M_n: float
    D_n: float
    DC_n: float
    C: float
    biased: bool


def _simulate_one_cell(size: float, key: int, clock_needed: float,
                       cfg: LevyConfig, level_da: float, floor_abs: float,
                       max_chunks: int = 64):
    """Simulate one cell's signed size path until its clock covers
    ``clock_needed`` (age units) or the size falls below ``floor_abs``.

    Returns (ages, values, jump_ages, jump_sizes, zeta, censored)."""
    w = abs(size)
    sgn = 1.0 if size > 0 else -1.0
    xi_t = [np.array([0.0])]
    xi_v = [np.array([0.0])]
    jumps = []
    t_off = 0.0
    x_off = 0.0
    clock = 0.0
    dead = False
    for chunk in range(max_chunks):
        rng = philox(key, _T_CELL, chunk)
        horizon = 4.0
        lp = sample_levy_xi(horizon, cfg, rng)
        xi_t.append(lp.times[1:] + t_off)
        xi_v.append(lp.xi[1:] + x_off)
        if len(lp.jumps):
            jumps.append(np.column_stack([lp.jumps[:, 0] + t_off, lp.jumps[:, 1]]))
        ex = np.exp(x_off + lp.xi)
        seg = 0.5 * (ex[:-1] + ex[1:]) * np.diff(lp.times)
        clock += float(seg.sum())
        t_off += horizon
        x_off += float(lp.xi[-1])
        if clock >= clock_needed:
            break
        if w * math.exp(x_off) < floor_abs:
            dead = True
            break
    times = np.concatenate(xi_t)
    vals = np.concatenate(xi_v)
    jarr = np.concatenate(jumps) if jumps else np.empty((0, 2))
    from .levy import LevyPath

    lp_all = LevyPath(times=times, xi=vals, jumps=jarr, eps=cfg.eps,
                      drift=np.nan, sigma=np.nan)
    age_max = min(clock, clock_needed) * w
    ages = np.arange(0.0, age_max + level_da, level_da)
    sp = lamperti_Z(lp_all, w, ages)
    values = sgn * np.where(np.isnan(sp.Z), 0.0, sp.Z)
    alive_mask = ~np.isnan(sp.Z)
    zeta = ages[alive_mask][-1] if alive_mask.any() else 0.0
    jl = sp.jumps[:, 0] if len(sp.jumps) else np.empty(0)
    js = sgn * sp.jumps[:, 1] if len(sp.jumps) else np.empty(0)
    keep = jl <= age_max
    return ages[alive_mask], values[alive_mask], jl[keep], js[keep], float(zeta), not dead


def simulate_cell_system(
    z: float,
    horizon: float,
    trunc: TruncationSpec,
    cfg: Optional[LevyConfig] = None,
    seed: int = 0,
    level_da: float = 1e-3,
) -> CellSystem:
    """Build the cell system explicitly: the Eve cell follows the size
    process from z; every recorded jump with |child| >= s_min spawns an
    independent child of size -(jump), simulated recursively up to
    generation G and below the level horizon.

    Children of one parent are labelled in decreasing order of |birth size|.
    """
    if z == 0:
        raise InvalidParameterError("z must be nonzero")
    if cfg is None:
        cfg = LevyConfig()
    cells: List[CellRecord] = []
    queue = [((), 0.0, float(z), derive_key(seed, _T_CELL))]
    while queue:
        label, b_u, size, key = queue.pop(0)
        clock_needed = (horizon - b_u) / abs(size)
        floor_abs = trunc.s_min * 1e-2
        ages, values, j_ages, j_sizes, zeta, censored = _simulate_one_cell(
            size, key, clock_needed, cfg, level_da, floor_abs
        )
        cells.append(CellRecord(
            label=label, birth_level=b_u, size0=size, zeta=zeta,
            censored=censored, ages=ages, values=values,
            jump_ages=j_ages, jump_sizes=j_sizes,
        ))
        if len(label) >= trunc.G:
            continue
        child_sizes = -j_sizes
        ok = (np.abs(child_sizes) >= trunc.s_min) & (b_u + j_ages < horizon)
        idx = np.nonzero(ok)[0]
        order = idx[np.argsort(-np.abs(child_sizes[idx]), kind="stable")]
        for rank, j in enumerate(order, start=1):
            queue.append((
                label + (rank,),
                b_u + float(j_ages[j]),
                float(child_sizes[j]),
                derive_key(key, rank),
            ))
    return CellSystem(z=z, cells=cells, truncation=trunc, horizon=horizon, seed=seed)


def snapshot_Xbar(cs: CellSystem, a: float) -> Snapshot:
    """Sizes of all cells alive at level a, ranked by decreasing |size|."""
    if a > cs.horizon:
        raise InvalidParameterError(f"snapshot level {a} beyond horizon {cs.horizon}")
    sizes = []
    labels = []
    for c in cs.cells:
        age = a - c.birth_level
        if age < 0 or age > c.zeta:
            continue
        if c.censored and age > c.ages[-1]:
            continue
        v = float(np.interp(age, c.ages, c.values))
        if v != 0.0:
            sizes.append(v)
            labels.append(c.label)
    order = np.argsort(-np.abs(np.asarray(sizes))) if sizes else []
    return Snapshot(
        level=a,
        sizes=np.asarray([sizes[i] for i in order]),
        labels=[labels[i] for i in order],
    )


def positive_gf_X(cs: CellSystem) -> CellSystem:
    """Restrict to cells whose every ancestor (inclusive) has positive
    birth size: the genuine positive growth-fragmentation."""
    keep = []
    positive = set()
    for c in sorted(cs.cells, key=lambda c: len(c.label)):
        if c.size0 > 0 and (len(c.label) == 0 or c.label[:-1] in positive):
            positive.add(c.label)
            keep.append(c)
    return CellSystem(z=cs.z, cells=keep, truncation=cs.truncation,
                      horizon=cs.horizon, seed=cs.seed)


def brw_observables(cs: CellSystem, n: int, C: float) -> BrwReport:
    """Branching-walk sums over generation n+1: squared masses M, the
    derivative sum D, and the Green-weighted truncated sum DC with cells
    killed (with their progeny) once their running size reaches C."""
    if n >= cs.truncation.G:
        raise InvalidParameterError("need n < G to observe generation n+1")
    by_label = {c.label: c for c in cs.cells}
    kill_age = {}
    admitted = {}
    for c in sorted(cs.cells, key=lambda c: len(c.label)):
        over = np.nonzero(np.abs(c.values) >= C)[0]
        kill_age[c.label] = c.ages[over[0]] if over.size else np.inf
        if len(c.label) == 0:
            admitted[c.label] = abs(c.size0) < C
        else:
            parent = by_label[c.label[:-1]]
            p_adm = admitted.get(c.label[:-1], False)
            birth_age = c.birth_level - parent.birth_level
            admitted[c.label] = (
                p_adm and abs(c.size0) < C and birth_age <= kill_age[c.label[:-1]]
            )
    M = D = DC = 0.0
    biased = False
    for c in cs.cells:
        if len(c.label) != n + 1:
            if len(c.label) <= n and c.censored:
                biased = True
            continue
        x = abs(c.size0)
        M += x * x
        D -= math.log(x) * x * x
        if admitted[c.label]:
            DC += math.pi * x * x * green_RC(x / 2.0, C)
    return BrwReport(n=n, M_n=M, D_n=D, DC_n=DC, C=C, biased=biased)


# ---------------------------------------------------------------------------
# Batch drivers (numba kernel)
# ---------------------------------------------------------------------------

_TUNING = dict(dt_big=0.02, dt_small=0.25, eps_cap=0.3, kill_ratio=1e-2,
               max_events=5_000_000)


def _table_args():
    t = jump_tables()
    return (t.s0_pos, t.ds_pos, t.y_pos, t.s0_neg, t.ds_neg, t.y_neg,
            t.eps_grid, t.sig2_grid, t.mu_grid)


def _empty_outputs(n_systems, n_levels, K, brw, gen1):
    out_topk = np.zeros((n_systems, n_levels, K) if n_levels else (0, 0, 0))
    out_alive = np.zeros((n_systems, n_levels) if n_levels else (0, 0), np.int64)
    out_sum52 = np.zeros((n_systems, n_levels) if n_levels else (0, 0))
    out_sumsq = np.zeros((n_systems, n_levels) if n_levels else (0, 0))
    out_brw = np.zeros((n_systems, 9) if brw else (0, 0))
    out_comp = np.zeros((n_systems, 3) if brw else (0, 0))
    out_gen1 = np.zeros((n_systems, 14) if gen1 else (0, 0))
    out_gen1n = np.zeros((n_systems, 3) if gen1 else (0, 0), np.int64)
    out_diag = np.zeros((n_systems, 4), np.int64)
    return (out_topk, out_alive, out_sum52, out_sumsq, out_brw, out_comp,
            out_gen1, out_gen1n, out_diag)


def run_snapshot_batch(
    n_systems: int,
    z: float,
    seed: int,
    trunc: TruncationSpec,
    levels,
    C: float = 0.0,
    K: int = 8,
    stream: int = 0,
    **tuning,
) -> dict:
    """Simulate systems and collect, at each level: the K largest signed
    sizes, alive counts, and positive-subsystem power sums."""
    levels = np.asarray(sorted(levels), dtype=float)
    tun = {**_TUNING, **tuning}
    outs = _empty_outputs(n_systems, len(levels), K, False, False)
    key = np.uint64(derive_key(seed, 0xCE11, stream))
    _kernels.run_cells(
        n_systems, float(z), key, trunc.s_min, trunc.G, 0, float(trunc.A),
        float(C), levels, *_table_args(),
        tun["dt_big"], tun["dt_small"], tun["eps_cap"], tun["kill_ratio"],
        tun["max_events"], *outs,
    )
    (out_topk, out_alive, out_sum52, out_sumsq, _, _, _, _, out_diag) = outs
    return dict(topk=out_topk, alive=out_alive, sum52=out_sum52,
                sumsq=out_sumsq, diag=out_diag, levels=levels)


def run_brw_batch(
    n_systems: int,
    z: float,
    seed: int,
    s_min: float,
    C: float,
    G_record: int = 3,
    stream: int = 0,
    **tuning,
) -> dict:
    """Branching-walk sums M_n, D_n, DC_n for n = 0..G_record-1.

    ``dc_completed`` adds, per system, the expected derivative-martingale
    mass of dropped (< s_min) children to every later generation; this is
    an unbiased completion of the truncated raw sums.
    """
    tun = {**_TUNING, **tuning}
    outs = _empty_outputs(n_systems, 0, 0, True, False)
    key = np.uint64(derive_key(seed, 0xB3, stream))
    _kernels.run_cells(
        n_systems, float(z), key, s_min, G_record - 1, G_record, math.inf,
        float(C), np.empty(0), *_table_args(),
        tun["dt_big"], tun["dt_small"], tun["eps_cap"], tun["kill_ratio"],
        tun["max_events"], *outs,
    )
    (_, _, _, _, out_brw, out_comp, _, _, out_diag) = outs
    dc_raw = out_brw[:, 6:9]
    dc_completed = dc_raw + np.cumsum(out_comp, axis=1)
    return dict(M=out_brw[:, 0:3], D=out_brw[:, 3:6], dc_raw=dc_raw,
                dc_completed=dc_completed, comp=out_comp, diag=out_diag)


def run_gen1_batch(
    n_systems: int,
    z: float,
    seed: int,
    s_min: float,
    stream: int = 0,
    **tuning,
) -> dict:
    """First-generation sums at thresholds (s_min, 2 s_min, 4 s_min) from
    common randomness: per system, sum x^2 and sum x^2 ln|x| over children
    with |x| above each threshold."""
    tun = {**_TUNING, **tuning}
    outs = _empty_outputs(n_systems, 0, 0, False, True)
    key = np.uint64(derive_key(seed, 0x6E1, stream))
    _kernels.run_cells(
        n_systems, float(z), key, s_min, 0, 0, math.inf,
        0.0, np.empty(0), *_table_args(),
        tun["dt_big"], tun["dt_small"], tun["eps_cap"], tun["kill_ratio"],
        tun["max_events"], *outs,
    )
    (_, _, _, _, _, _, out_gen1, out_gen1n, out_diag) = outs
    return dict(
        sum_sq=out_gen1[:, 0:6:2], sum_sq_log=out_gen1[:, 1:6:2],
        d_sq=out_gen1[:, 6:9], d_lg=out_gen1[:, 9:12],
        i2=out_gen1[:, 12], w_lg=out_gen1[:, 13],
        counts=out_gen1n, diag=out_diag,
        thresholds=np.array([s_min, 2 * s_min, 4 * s_min]),
    )


def run_eve_value_batch(
    n_systems: int,
    z: float,
    seed: int,
    level: float,
    s_min: float = 1e-3,
    stream: int = 0,
    **tuning,
) -> np.ndarray:
    """Signed Eve-cell size at one level (0 when already dead): the
    Lamperti-route sample of the locally-largest size law."""
    trunc = TruncationSpec(s_min=s_min, G=0, A=math.inf)
    out = run_snapshot_batch(
        n_systems, z, seed, trunc, [level], K=1, stream=stream, **tuning
    )
    return out["topk"][:, 0, 0]
