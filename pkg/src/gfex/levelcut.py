"""Cutting a discretized excursion at horizontal levels.

Fragments above a level are the maximal sub-paths with y > a; their signed
size is the difference of the interpolated x-positions of the bounding
down- and up-crossings.  The split tree records how fragments divide as the
level rises (one split per strict interior local minimum of y); the
locally largest path follows, at every split, the child of larger absolute
size.  Crossing abscissas are always linearly interpolated between the
bracketing grid samples with a shared helper, so sizes computed by
different routines on the same cells agree bitwise and conservation at
splits is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .bridges import ExcursionPath
from .config import GridSpec
from .errors import InvalidParameterError, MalformedPathError

__all__ = [
    "FragmentSet",
    "SplitTree",
    "LocallyLargestPath",
    "fragments_at_level",
    "build_split_tree",
    "locally_largest",
    "offspring_of_locally_largest",
    "time_in_small_excursions",
]


def _cross(times, x, y, i, a):
    """(t*, x*) where y crosses a inside cell (i, i+1); grid-exact at cell
    boundaries (mirrors the kernel helper bit-for-bit)."""
    if a == y[i]:
        return times[i], x[i]
    if a == y[i + 1]:
        return times[i + 1], x[i + 1]
    fr = (a - y[i]) / (y[i + 1] - y[i])
    return times[i] + fr * (times[i + 1] - times[i]), x[i] + fr * (x[i + 1] - x[i])


@dataclass
class FragmentSet:
    """Ranked signed fragment sizes above one level.

    ``thin`` flags fragments spanning fewer than two grid cells; they are
    kept (their size is still the interpolated crossing difference) but are
    the main carriers of discretization bias.
    """

    level: float
    sizes: np.ndarray            # ranked by decreasing |size|
    intervals: np.ndarray        # (k, 2) grid-index pairs (up cell, down cell)
    t_cross: np.ndarray          # (k, 2) interpolated crossing times
    x_cross: np.ndarray          # (k, 2) interpolated crossing abscissas
    thin: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))

    @property
    def n_fragments(self) -> int:
        return len(self.sizes)


def fragments_at_level(path: ExcursionPath, a: float) -> FragmentSet:
    """All fragments above level a, ranked by decreasing |size|.

    a = 0 returns the whole excursion as a single fragment of size z; a at
    or above the path maximum returns the empty set.
    """
    if a < 0:
        raise InvalidParameterError("level must be >= 0")
    t, x, y = path.times, path.x, path.y
    if a == 0.0:
        return FragmentSet(
            level=0.0,
            sizes=np.array([path.z]),
            intervals=np.array([[0, len(t) - 2]]),
            t_cross=np.array([[t[0], t[-1]]]),
            x_cross=np.array([[x[0], x[-1]]]),
            thin=np.array([False]),
        )
    mask = y > a
    if not mask.any():
        return FragmentSet(a, np.empty(0), np.empty((0, 2), int),
                           np.empty((0, 2)), np.empty((0, 2)),
                           np.empty(0, dtype=bool))
    d = np.diff(mask.astype(np.int8))
    starts = np.nonzero(d == 1)[0]      # up-crossing inside cell (s, s+1)
    ends = np.nonzero(d == -1)[0]       # down-crossing inside cell (e, e+1)
    k = len(starts)
    sizes = np.empty(k)
    tcr = np.empty((k, 2))
    xcr = np.empty((k, 2))
    for j in range(k):
        tu, xu = _cross(t, x, y, starts[j], a)
        td, xd = _cross(t, x, y, ends[j], a)
        sizes[j] = xd - xu
        tcr[j] = (tu, td)
        xcr[j] = (xu, xd)
    order = np.argsort(-np.abs(sizes), kind="stable")
    return FragmentSet(
        level=a,
        sizes=sizes[order],
        intervals=np.column_stack([starts, ends])[order],
        t_cross=tcr[order],
        x_cross=xcr[order],
        thin=((ends - starts) < 2)[order],
    )


@dataclass
class SplitNode:
    node_id: int
    parent_id: int              # -1 for the root
    split_height: float         # level at which this node was created
    interval: Tuple[int, int]   # grid-index interval (l, r)
    birth_size: float


@dataclass
class SplitTree:
    """Fragment genealogy of one excursion across all levels at once.

    Node 0 is the whole excursion (birth level 0, size z); each interior
    strict local minimum of y splits the node containing it into two
    children born at the minimum's height.
    """

    nodes: List[SplitNode]
    children: List[Tuple[int, int]]  # (left, right) per node; (-1,-1) leaf
    split_at: List[int]              # grid index of the splitting minimum; -1 leaf
    path: ExcursionPath

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def build_split_tree(path: ExcursionPath) -> SplitTree:
    """Construct the full split tree (intended for desk-scale paths; the
    streaming estimators use the dedicated kernels instead)."""
    t, x, y = path.times, path.x, path.y
    n = len(y)
    if n >= 3 and np.min(y[1:-1]) <= 0:
        raise MalformedPathError("excursion must be strictly positive inside")
    nodes = [SplitNode(0, -1, 0.0, (0, n - 1), path.z)]
    children = [(-1, -1)]
    split_at = [-1]
    stack = [0]
    while stack:
        nid = stack.pop()
        l, r = nodes[nid].interval
        m = int(_kernels._lowest_interior_min(y, l, r))
        if m < 0:
            continue
        h = float(y[m])
        _, xu = _cross(t, x, y, _first_upcross(y, l, r, h), h)
        _, xd = _cross(t, x, y, _last_downcross(y, l, r, h), h)
        left = SplitNode(len(nodes), nid, h, (l, m), x[m] - xu)
        nodes.append(left)
        children.append((-1, -1))
        split_at.append(-1)
        right = SplitNode(len(nodes), nid, h, (m, r), xd - x[m])
        nodes.append(right)
        children.append((-1, -1))
        split_at.append(-1)
        children[nid] = (left.node_id, right.node_id)
        split_at[nid] = m
        stack.append(left.node_id)
        stack.append(right.node_id)
    return SplitTree(nodes=nodes, children=children, split_at=split_at, path=path)


def _first_upcross(y, l, r, a):
    for i in range(l, r):
        if y[i] <= a < y[i + 1]:
            return i
    raise MalformedPathError("no up-crossing found")


def _last_downcross(y, l, r, a):
    for i in range(r - 1, l - 1, -1):
        if y[i] > a >= y[i + 1]:
            return i
    raise MalformedPathError("no down-crossing found")


@dataclass
class LocallyLargestPath:
    """The always-follow-the-bigger-piece size path and its jump record."""

    levels: np.ndarray          # level grid (uniform + exact split heights)
    values: np.ndarray          # size at each level (0 past the apex)
    jump_levels: np.ndarray     # split heights along the branch
    jump_sizes: np.ndarray      # discarded (offspring) signed sizes
    jump_intervals: np.ndarray  # (k, 2) grid intervals of discarded sides
    apex_height: float
    apex_time: float
    tie_count: int
    segments: tuple             # raw branch segments (kernel output)


def locally_largest(path: ExcursionPath, grid: Optional[GridSpec] = None) -> LocallyLargestPath:
    """Greedy descent from the whole excursion: at each split keep the child
    of larger |size| (ties to the earlier child, counted)."""
    t = np.ascontiguousarray(path.times)
    x = np.ascontiguousarray(path.x)
    y = np.ascontiguousarray(path.y)
    (nseg, seg_l, seg_r, seg_b0, seg_bd, disc_size, disc_l, disc_r,
     chose_left, ties, apex_t) = _kernels.branch_walk(t, x, y)
    apex_h = float(seg_bd[-1])
    da = grid.level_da if grid is not None else max(apex_h / 256.0, 1e-9)
    levels = np.arange(0.0, apex_h, da)
    levels = np.unique(np.concatenate([levels, seg_bd[:-1]]))
    levels = levels[levels < apex_h]
    values = np.empty(len(levels))
    for i, a in enumerate(levels):
        values[i] = _kernels.xi_at_level(t, x, y, seg_l, seg_r, seg_b0, seg_bd, a)
    return LocallyLargestPath(
        levels=levels,
        values=values,
        jump_levels=np.asarray(seg_bd[:-1]),
        jump_sizes=np.asarray(disc_size[:-1]),
        jump_intervals=np.column_stack([disc_l[:-1], disc_r[:-1]]),
        apex_height=apex_h,
        apex_time=float(apex_t),
        tie_count=int(ties),
        segments=(seg_l, seg_r, seg_b0, seg_bd),
    )


def offspring_of_locally_largest(
    path: ExcursionPath, ll: Optional[LocallyLargestPath] = None
) -> list:
    """Extract the discarded sub-excursions at the jumps of the locally
    largest path, re-based to start at the origin.

    Returns a list of (size, level, sub_path) with sub_path an
    ExcursionPath of endpoint `size`; endpoints are pinned exactly.
    """
    if ll is None:
        ll = locally_largest(path)
    t, x, y = path.times, path.x, path.y
    out = []
    for j in range(len(ll.jump_levels)):
        a = float(ll.jump_levels[j])
        zj = float(ll.jump_sizes[j])
        l, r = int(ll.jump_intervals[j, 0]), int(ll.jump_intervals[j, 1])
        iu = _first_upcross(y, l, r, a)
        idn = _last_downcross(y, l, r, a)
        tu, xu = _cross(t, x, y, iu, a)
        td, xd = _cross(t, x, y, idn, a)
        ts = np.concatenate([[tu], t[iu + 1 : idn + 1], [td]])
        xs = np.concatenate([[xu], x[iu + 1 : idn + 1], [xd]])
        ys = np.concatenate([[a], y[iu + 1 : idn + 1], [a]])
        sub = ExcursionPath(
            z=zj,
            duration=float(td - tu),
            times=ts - tu,
            x=xs - xu,
            y=ys - a,
            dt=path.dt,
        )
        sub.x[-1] = zj
        sub.y[0] = 0.0
        sub.y[-1] = 0.0
        out.append((zj, a, sub))
    return out


def time_in_small_excursions(path: ExcursionPath, C: float) -> float:
    """Time spent at points whose entire fragment ancestry (at every level
    up to the point's height) has |size| < C."""
    if not (C > 0):
        raise InvalidParameterError("C must be > 0")
    t = np.ascontiguousarray(path.times)
    x = np.ascontiguousarray(path.x)
    y = np.ascontiguousarray(path.y)
    return float(_kernels.tc_time(t, x, y, C))
