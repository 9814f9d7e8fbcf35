"""Numba kernels for the hot loops: level-cut tree walks over discretized
excursions, and the branching cell-system simulator.

All randomness inside kernels comes from SplitMix64 sequences keyed per
cell, so results are independent of scheduling and bit-reproducible.  The
jump inverse-CDF tables and small-jump moment grids are built in
:mod:`gfex.levy` and passed in as plain arrays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_MUL1 = U64(0xBF58476D1CE4E5B9)
_MUL2 = U64(0x94D049BB133111EB)

LN2 = np.log(2.0)
PI = np.pi
TWO_OVER_PI = 2.0 / np.pi
FOUR_OVER_PI = 4.0 / np.pi


# ---------------------------------------------------------------------------
# SplitMix64 primitives
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _mix64(x):
    x = U64(x)
    x = (x ^ (x >> U64(30))) * _MUL1
    x = (x ^ (x >> U64(27))) * _MUL2
    return x ^ (x >> U64(31))


@njit(cache=True, inline="always")
def _u01(state):
    s = U64(state) + _GAMMA
    r = _mix64(s)
    # 53-bit mantissa, strictly inside (0, 1)
    return s, (np.float64(r >> U64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _normal(state):
    s, u1 = _u01(state)
    s, u2 = _u01(s)
    return s, np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, inline="always")
def _derive_child_key(key, index):
    w = _mix64(U64(index) + U64(1)) | U64(1)
    return _mix64(U64(key) + _GAMMA * w)


# ---------------------------------------------------------------------------
# Closed-form tail functionals of the jump measure (see gfex.levy)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _tail_pos(y0):
    x = np.expm1(y0)
    return TWO_OVER_PI * (1.0 / x + 1.0 / (1.0 + x) + 2.0 * np.log(x / (1.0 + x)))


@njit(cache=True, inline="always")
def _tail_neg(y1):
    u = -np.expm1(y1)
    return TWO_OVER_PI * (1.0 / u - 1.0 / (1.0 - u) + 2.0 * np.log((1.0 - u) / u))


@njit(cache=True, inline="always")
def _comp_tail(eps):
    return TWO_OVER_PI * (eps + 2.0 * np.sinh(eps) - 2.0)


@njit(cache=True, inline="always")
def _sample_jump(state, mp, mn, s0p, dsp, ypos, s0n, dsn, yneg):
    """One jump with |y| > eps: side by tail-mass ratio, value by inverse CDF
    on the uniform log-mass tables (analytic tails beyond table range)."""
    s, u_side = _u01(state)
    s, u_mass = _u01(s)
    if u_side < mp / (mp + mn):
        sv = np.log(u_mass * mp)
        idx = (sv - s0p) / dsp
        if idx <= 0.0:
            return s, ypos[0] + (s0p - sv) / 3.0  # e^{-3y} tail
        n = ypos.shape[0]
        if idx >= n - 1:
            return s, ypos[n - 1]
        i0 = int(idx)
        fr = idx - i0
        return s, ypos[i0] * (1.0 - fr) + ypos[i0 + 1] * fr
    sv = np.log(u_mass * mn)
    idx = (sv - s0n) / dsn
    if idx <= 0.0:
        u_tail = 0.5 - np.exp(sv) * PI / 32.0
        return s, np.log1p(-u_tail)
    n = yneg.shape[0]
    if idx >= n - 1:
        return s, yneg[n - 1]
    i0 = int(idx)
    fr = idx - i0
    return s, yneg[i0] * (1.0 - fr) + yneg[i0 + 1] * fr


@njit(cache=True, inline="always")
def _moments_at(eps, leps_grid, sig2_grid, mu_grid):
    le = np.log(eps)
    n = leps_grid.shape[0]
    if le <= leps_grid[0]:
        return sig2_grid[0], mu_grid[0]
    if le >= leps_grid[n - 1]:
        return sig2_grid[n - 1], mu_grid[n - 1]
    step = leps_grid[1] - leps_grid[0]
    idx = (le - leps_grid[0]) / step
    i0 = int(idx)
    if i0 >= n - 1:
        i0 = n - 2
    fr = idx - i0
    return (
        sig2_grid[i0] * (1.0 - fr) + sig2_grid[i0 + 1] * fr,
        mu_grid[i0] * (1.0 - fr) + mu_grid[i0 + 1] * fr,
    )


@njit(cache=True, inline="always")
def _g2(u):
    """int_{|x| >= u} x^2 L~(dx) for the jump-factor measure
    L~(dx) = (2/pi) dx / (x^2 (1+x)^2) on x > -1/2:  g2(0) = 4/pi."""
    if u <= 0.0:
        return FOUR_OVER_PI
    if u < 0.5:
        return TWO_OVER_PI * (1.0 / (1.0 + u) + 2.0 - 1.0 / (1.0 - u))
    return TWO_OVER_PI / (1.0 + u)


@njit(cache=True, inline="always")
def _g2l(u):
    """int_{|x| >= u} x^2 ln|x| L~(dx):  g2l(0) = -(4/pi) ln 2."""
    if u <= 0.0:
        return -FOUR_OVER_PI * LN2
    lu = np.log(u)
    pos = np.log1p(u) - lu * u / (1.0 + u)
    if u >= 0.5:
        return TWO_OVER_PI * pos
    neg = -2.0 * LN2 - lu * u / (1.0 - u) - np.log1p(-u)
    return TWO_OVER_PI * (pos + neg)


@njit(cache=True, inline="always")
def _green_rc(z, C):
    """Interval Green function; caller guarantees 0 < |z| < C."""
    zt = 2.0 * z / C
    if zt >= 1.0 or zt <= -1.0:
        return 0.0
    s = np.sqrt((1.0 + zt) / (1.0 - zt))
    return -(np.log(np.abs(s - 1.0)) - np.log(np.abs(s + 1.0))) / (2.0 * PI)


# ---------------------------------------------------------------------------
# Level-cut geometry kernels
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _cross_x(times, x, y, i, a):
    """Interpolated (t*, x*) where y crosses level a inside cell (i, i+1).
    Levels equal to a grid value return that grid point exactly, so sizes
    computed from shared crossings agree bitwise."""
    if a == y[i]:
        return times[i], x[i]
    if a == y[i + 1]:
        return times[i + 1], x[i + 1]
    fr = (a - y[i]) / (y[i + 1] - y[i])
    return times[i] + fr * (times[i + 1] - times[i]), x[i] + fr * (x[i + 1] - x[i])


@njit(cache=True)
def _interval_size_at(times, x, y, l, r, a):
    """Signed size of the single fragment above level a inside (l, r).

    Valid along split-tree node intervals for levels between the node's
    birth height and its split height (there is exactly one maximal run of
    y > a there).  Returns (size, t_up, x_up, t_dn, x_dn, iu, idn)."""
    iu = -1
    for i in range(l, r):
        if y[i] <= a < y[i + 1]:
            iu = i
            break
    idn = -1
    for i in range(r - 1, l - 1, -1):
        if y[i] > a >= y[i + 1]:
            idn = i
            break
    if iu < 0 or idn < 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, -1, -1
    tu, xu = _cross_x(times, x, y, iu, a)
    td, xd = _cross_x(times, x, y, idn, a)
    return xd - xu, tu, xu, td, xd, iu, idn


@njit(cache=True)
def _interior_minima(y):
    """Indices of strict interior local minima (plateaus keep their first
    index), sorted by (height, index)."""
    n = y.shape[0]
    idx = np.empty(n, np.int64)
    k = 0
    for i in range(1, n - 1):
        if y[i - 1] > y[i] and y[i + 1] >= y[i]:
            idx[k] = i
            k += 1
    idx = idx[:k]
    heights = np.empty(k, np.float64)
    for j in range(k):
        heights[j] = y[idx[j]]
    order = np.argsort(heights)
    out = idx[order]
    # make ties deterministic: ascending index within equal heights
    j = 0
    while j < k:
        j2 = j
        while j2 + 1 < k and heights[order[j2 + 1]] == heights[order[j]]:
            j2 += 1
        if j2 > j:
            sub = np.sort(out[j : j2 + 1])
            out[j : j2 + 1] = sub
        j = j2 + 1
    return out


@njit(cache=True)
def branch_walk(times, x, y):
    """Greedy descent to the locally largest fragment in O(n + K log K).

    Returns (nseg, seg_l, seg_r, seg_b0, seg_bd, disc_size, disc_l, disc_r,
    chose_left, tie_count, apex_time).  Segment k is the active fragment
    interval for levels [seg_b0[k], seg_bd[k]); every segment but the last
    ends at a split whose discarded side is recorded; the last segment's
    seg_bd is the apex height.
    """
    n = y.shape[0]
    mins = _interior_minima(y)
    cap = mins.shape[0] + 1
    seg_l = np.empty(cap, np.int64)
    seg_r = np.empty(cap, np.int64)
    seg_b0 = np.empty(cap, np.float64)
    seg_bd = np.empty(cap, np.float64)
    disc_size = np.empty(cap, np.float64)
    disc_l = np.empty(cap, np.int64)
    disc_r = np.empty(cap, np.int64)
    chose_left = np.empty(cap, np.uint8)
    l = 0
    r = n - 1
    b0 = 0.0
    iu = 0
    idn = n - 2
    k = 0
    ties = 0
    for jm in range(mins.shape[0]):
        m = mins[jm]
        if m <= l or m >= r:
            continue
        h = y[m]
        # advance the outer crossing pointers to level h (monotone)
        while iu < m and not (y[iu] <= h < y[iu + 1]):
            iu += 1
        while idn > m and not (y[idn] > h >= y[idn + 1]):
            idn -= 1
        tu, xu = _cross_x(times, x, y, iu, h)
        td, xd = _cross_x(times, x, y, idn, h)
        szl = x[m] - xu
        szr = xd - x[m]
        seg_l[k] = l
        seg_r[k] = r
        seg_b0[k] = b0
        seg_bd[k] = h
        take_left = np.abs(szl) > np.abs(szr)
        if np.abs(szl) == np.abs(szr):
            ties += 1
            take_left = True
        if take_left:
            disc_size[k] = szr
            disc_l[k] = m
            disc_r[k] = r
            chose_left[k] = 1
            r = m
            idn = m - 1
        else:
            disc_size[k] = szl
            disc_l[k] = l
            disc_r[k] = m
            chose_left[k] = 0
            l = m
            iu = m
        b0 = h
        k += 1
    # final leaf segment: apex at the highest sample of the interval
    apex = y[l]
    at = times[l]
    for i in range(l, r + 1):
        if y[i] > apex:
            apex = y[i]
            at = times[i]
    seg_l[k] = l
    seg_r[k] = r
    seg_b0[k] = b0
    seg_bd[k] = apex
    disc_size[k] = np.nan
    disc_l[k] = -1
    disc_r[k] = -1
    chose_left[k] = 0
    k += 1
    return (
        k, seg_l[:k], seg_r[:k], seg_b0[:k], seg_bd[:k],
        disc_size[:k], disc_l[:k], disc_r[:k], chose_left[:k], ties, at,
    )


@njit(cache=True)
def xi_at_level(times, x, y, seg_l, seg_r, seg_b0, seg_bd, a):
    """Evaluate the locally largest size at level a from branch segments;
    0.0 if a is at or above the apex."""
    nseg = seg_l.shape[0]
    if a < seg_b0[0]:
        return 0.0
    for k in range(nseg):
        if seg_b0[k] <= a < seg_bd[k]:
            sz, _, _, _, _, iu, idn = _interval_size_at(
                times, x, y, seg_l[k], seg_r[k], a
            )
            return sz
    return 0.0


@njit(cache=True)
def _grow_f(arr, cap):
    out = np.empty(cap, np.float64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_i(arr, cap):
    out = np.empty(cap, np.int64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_u8(arr, cap):
    out = np.empty(cap, np.uint8)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_u64(arr, cap):
    out = np.empty(cap, np.uint64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _node_first_break(times, x, y, l, r, b0, bd, C):
    """First level in [b0, bd) where the fragment (l, r) has |size| >= C.

    size(b) is continuous piecewise linear in b, with kinks exactly where an
    interpolated crossing moves to a new grid cell (running-max levels of y
    scanned inward from both ends); the first crossing of C is solved
    linearly inside the violating piece.  Returns +inf if none.
    """
    sz_prev, tu, xu, td, xd, iu, idn = _interval_size_at(times, x, y, l, r, b0)
    if iu < 0:
        return np.inf
    if np.abs(sz_prev) >= C:
        return b0
    lv = b0
    while lv < bd:
        up_top = y[iu + 1]
        dn_top = y[idn]
        nxt = up_top if up_top < dn_top else dn_top
        if nxt > bd:
            nxt = bd
        _, xu_n = _cross_x(times, x, y, iu, nxt)
        _, xd_n = _cross_x(times, x, y, idn, nxt)
        sz_next = xd_n - xu_n
        if np.abs(sz_next) >= C:
            dsz = sz_next - sz_prev
            tcrit = 1.0
            if dsz != 0.0:
                tcrit = 2.0
                t1 = (C - sz_prev) / dsz
                t2 = (-C - sz_prev) / dsz
                if 0.0 <= t1 <= 1.0:
                    tcrit = t1
                if 0.0 <= t2 <= 1.0 and t2 < tcrit:
                    tcrit = t2
                if tcrit > 1.0:
                    tcrit = 1.0
            return lv + tcrit * (nxt - lv)
        sz_prev = sz_next
        if nxt >= bd:
            break
        lv = nxt
        if up_top <= dn_top:
            i = iu + 1
            while i < r and not (y[i] <= lv < y[i + 1]):
                i += 1
            if i >= r:
                break
            iu = i
        if dn_top <= up_top:
            i = idn - 1
            while i >= l and not (y[i] > lv >= y[i + 1]):
                i -= 1
            if i < l:
                break
            idn = i
    return np.inf


@njit(cache=True)
def _portion_below(times, y, l, r, lo, hi):
    """Lebesgue measure of {t in (times[l], times[r]) : lo <= y(t) < hi},
    with linear interpolation inside grid cells."""
    total = 0.0
    for i in range(l, r):
        y0 = y[i]
        y1 = y[i + 1]
        dt = times[i + 1] - times[i]
        a = y0 if y0 < y1 else y1
        b = y1 if y1 > y0 else y0
        if b <= a:  # flat cell
            if lo <= y0 < hi:
                total += dt
            continue
        ov_lo = a if a > lo else lo
        ov_hi = b if b < hi else hi
        if ov_hi > ov_lo:
            total += dt * (ov_hi - ov_lo) / (b - a)
    return total


@njit(cache=True)
def _lowest_interior_min(y, l, r):
    """Index of the lowest strict interior local minimum of y on (l, r),
    plateaus and ties broken by index order; -1 if none."""
    best = -1
    bv = 0.0
    for k in range(l + 1, r):
        if y[k - 1] > y[k] and y[k + 1] >= y[k]:
            if best < 0 or y[k] < bv:
                best = k
                bv = y[k]
    return best


@njit(cache=True)
def _band_walk(times, x, y, l, r, b0, bd, iu, idn, C):
    """Walk the single fragment of (l, r) from level b0 up to bd, tracking
    its crossing cells, and return the first level where |size| >= C
    (+inf if none) together with the final pointer positions.

    size(b) is piecewise linear with kinks at the cell-top levels of the
    two inward running-max staircases; the crossing of C is solved exactly
    inside the violating piece.  Pointers enter from the parent band and
    advance monotonically, so the total walk cost is amortized linear.
    """
    if bd <= b0:
        return np.inf, iu, idn
    if iu < l:
        iu = l
    if idn > r - 1:
        idn = r - 1
    while iu < r - 1 and not (y[iu] <= b0 < y[iu + 1]):
        iu += 1
    while idn > l and not (y[idn] > b0 >= y[idn + 1]):
        idn -= 1
    if not (y[iu] <= b0 < y[iu + 1]) or not (y[idn] > b0 >= y[idn + 1]):
        return np.inf, iu, idn
    _, xu = _cross_x(times, x, y, iu, b0)
    _, xd = _cross_x(times, x, y, idn, b0)
    sz_prev = xd - xu
    if np.abs(sz_prev) >= C:
        return b0, iu, idn
    lv = b0
    while lv < bd:
        up_top = y[iu + 1]
        dn_top = y[idn]
        nxt = up_top if up_top < dn_top else dn_top
        if nxt > bd:
            nxt = bd
        _, xu_n = _cross_x(times, x, y, iu, nxt)
        _, xd_n = _cross_x(times, x, y, idn, nxt)
        sz_next = xd_n - xu_n
        if np.abs(sz_next) >= C:
            dsz = sz_next - sz_prev
            tcrit = 1.0
            if dsz != 0.0:
                tcrit = 2.0
                t1 = (C - sz_prev) / dsz
                t2 = (-C - sz_prev) / dsz
                if 0.0 <= t1 <= 1.0:
                    tcrit = t1
                if 0.0 <= t2 <= 1.0 and t2 < tcrit:
                    tcrit = t2
                if tcrit > 1.0:
                    tcrit = 1.0
            return lv + tcrit * (nxt - lv), iu, idn
        sz_prev = sz_next
        if nxt >= bd:
            break
        lv = nxt
        if up_top <= dn_top:
            i = iu + 1
            while i < r and not (y[i] <= lv < y[i + 1]):
                i += 1
            if i >= r:
                break
            iu = i
        if dn_top <= up_top:
            i = idn - 1
            while i >= l and not (y[i] > lv >= y[i + 1]):
                i -= 1
            if i < l:
                break
            idn = i
    return np.inf, iu, idn


@njit(cache=True)
def tc_time(times, x, y, C):
    """Time spent at points whose whole fragment ancestry has |size| < C.

    Three passes, all amortized O(n + K log K) for K interior minima:

    1. build the split tree bottom-up by merging adjacent segments across
       minima in descending height order (boundary linked list);
    2. walk every node's level band top-down with inherited crossing
       pointers, recording its first |size| >= C level, and propagate the
       ancestral minimum of those levels down to the leaves;
    3. a point at height v is alive iff v is below its leaf's propagated
       break level, so the answer is one linear sweep over grid cells.
    """
    n = y.shape[0]
    mins_h = _interior_minima(y)  # ascending (height, index)
    K = mins_h.shape[0]
    n_nodes = 2 * K + 1
    node_l = np.empty(n_nodes, np.int64)
    node_r = np.empty(n_nodes, np.int64)
    node_m = np.empty(n_nodes, np.int64)
    node_h = np.empty(n_nodes, np.float64)
    child_l = np.full(n_nodes, -1, np.int64)
    child_r = np.full(n_nodes, -1, np.int64)
    mins_idx = np.sort(mins_h)
    pos_of = np.searchsorted(mins_idx, mins_h)
    # leaves: segments between consecutive minima (ids 0..K)
    for j in range(K + 1):
        node_l[j] = 0 if j == 0 else mins_idx[j - 1]
        node_r[j] = (n - 1) if j == K else mins_idx[j]
        node_m[j] = -1
        node_h[j] = 0.0
    left_nb = np.empty(K, np.int64)
    right_nb = np.empty(K, np.int64)
    for k in range(K):
        left_nb[k] = k - 1
        right_nb[k] = k + 1
    seg_root = np.arange(K + 1)
    nid = K + 1
    for j in range(K - 1, -1, -1):  # descending height
        k = pos_of[j]
        lb = left_nb[k]
        rb = right_nb[k]
        left_seg = seg_root[lb + 1]
        right_seg = seg_root[k + 1]
        node_l[nid] = node_l[left_seg]
        node_r[nid] = node_r[right_seg]
        node_m[nid] = mins_idx[k]
        node_h[nid] = y[mins_idx[k]]
        child_l[nid] = left_seg
        child_r[nid] = right_seg
        seg_root[lb + 1] = nid
        if lb >= 0:
            right_nb[lb] = rb
        if rb < K:
            left_nb[rb] = lb
        nid += 1
    root = seg_root[0]
    # top-down walks (descending id = parents before children)
    st_b0 = np.zeros(n_nodes)
    st_ceil = np.full(n_nodes, np.inf)
    st_iu = np.zeros(n_nodes, np.int64)
    st_idn = np.full(n_nodes, max(n - 2, 0), np.int64)
    # nodes with id > K are internal, created children-first, so descending
    # internal ids visit parents first; leaves are finished afterwards
    leaf_ceil = np.full(K + 1, np.inf)
    for v in range(n_nodes - 1, K, -1):
        l = node_l[v]
        r = node_r[v]
        b0 = st_b0[v] if v != root else 0.0
        ceil_in = st_ceil[v] if v != root else np.inf
        h = node_h[v]
        iu = st_iu[v] if v != root else 0
        idn = st_idn[v] if v != root else n - 2
        if ceil_in <= b0:
            bstar = np.inf
            iu_o = iu
            idn_o = idn
        else:
            bstar, iu_o, idn_o = _band_walk(times, x, y, l, r, b0, h, iu, idn, C)
        ceil_out = ceil_in if ceil_in < bstar else bstar
        cl = child_l[v]
        cr = child_r[v]
        m = node_m[v]
        st_b0[cl] = h
        st_ceil[cl] = ceil_out
        st_iu[cl] = iu_o
        st_idn[cl] = m - 1
        st_b0[cr] = h
        st_ceil[cr] = ceil_out
        st_iu[cr] = m
        st_idn[cr] = idn_o
    # leaves: one more band walk up to the leaf apex
    for j in range(K + 1):
        l = node_l[j]
        r = node_r[j]
        b0 = st_b0[j] if K > 0 else 0.0
        ceil_in = st_ceil[j] if K > 0 else np.inf
        if ceil_in <= b0:
            leaf_ceil[j] = ceil_in
            continue
        apex = y[l]
        for i in range(l, r + 1):
            if y[i] > apex:
                apex = y[i]
        if apex <= b0 or r - l < 1:
            leaf_ceil[j] = ceil_in
            continue
        iu = st_iu[j] if K > 0 else 0
        idn = st_idn[j] if K > 0 else max(n - 2, 0)
        bstar, _, _ = _band_walk(times, x, y, l, r, b0, apex, iu, idn, C)
        leaf_ceil[j] = ceil_in if ceil_in < bstar else bstar
    # final sweep: per-cell portion below the leaf's break ceiling
    total = 0.0
    leaf = 0
    for i in range(n - 1):
        if leaf < K and i >= mins_idx[leaf]:
            leaf += 1
        total += _portion_below(times, y, i, i + 1, 0.0, leaf_ceil[leaf])
    return total


@njit(cache=True)
def fragment_squares_at(times, x, y, a, z):
    """(sum of squared fragment sizes, count, largest signed, 2nd, 3rd |size|)
    at level a > 0; level 0 returns the whole-excursion values."""
    n = y.shape[0]
    s1 = 0.0
    best1 = 0.0
    best2 = 0.0
    best3 = 0.0
    count = 0
    if a <= 0.0:
        return z * z, 1, z, 0.0, 0.0
    i = 0
    while i < n - 1:
        if y[i] <= a < y[i + 1]:
            _, xu = _cross_x(times, x, y, i, a)
            j = i + 1
            while j < n - 1 and not (y[j] > a >= y[j + 1]):
                j += 1
            if j >= n - 1 and y[n - 1] > a:
                break
            _, xd = _cross_x(times, x, y, j, a)
            sz = xd - xu
            s1 += sz * sz
            count += 1
            az = np.abs(sz)
            if az > np.abs(best1):
                best3 = best2
                best2 = np.abs(best1)
                best1 = sz
            elif az > best2:
                best3 = best2
                best2 = az
            elif az > best3:
                best3 = az
            i = j
        i += 1
    return s1, count, best1, best2, best3


# ---------------------------------------------------------------------------
# Cell-system kernel
# ---------------------------------------------------------------------------


@njit(cache=True)
def run_cells(
    n_systems,
    z,
    master_key,
    s_min,
    G_sim,
    G_record,
    A,
    C,
    snap_levels,
    # jump tables / moment grids
    s0p, dsp, ypos, s0n, dsn, yneg, leps, sig2g, mug,
    # tuning
    dt_big, dt_small, eps_cap, kill_ratio, max_events,
    # outputs (size-0 arrays disable a collection mode)
    out_topk,
    out_alive,
    out_sum52,
    out_sumsq,
    out_brw,
    out_comp,
    out_gen1,
    out_gen1n,
    out_diag,
):
    """Simulate ``n_systems`` independent cell systems started from z.

    Children with |birth size| < s_min are dropped (their expected truncated
    derivative-martingale mass is accumulated into ``out_comp`` per
    generation); generations above ``G_sim`` are not simulated but births up
    to ``G_record`` are counted in the branching-walk sums; cells are only
    spawned below the level horizon ``A``.

    Per-cell chunked tuning: the jump cutoff eps is re-chosen whenever the
    relative size leaves [half, double] of its chunk-start value, so that
    every jump able to produce a child above s_min is sampled exactly
    (capture margin 4x) while small cells run with coarse, cheap cutoffs.
    """
    K = out_topk.shape[2] if out_topk.size else 0
    n_lev = snap_levels.shape[0]
    do_snap = n_lev > 0
    do_brw = out_brw.size > 0
    do_gen1 = out_gen1.size > 0
    abs_z = np.abs(z)
    sign_z = 1.0 if z > 0 else -1.0

    cap = 4096
    stk_w = np.empty(cap, np.float64)
    stk_sign = np.empty(cap, np.float64)
    stk_b = np.empty(cap, np.float64)
    stk_gen = np.empty(cap, np.int64)
    stk_key = np.empty(cap, np.uint64)
    stk_uc = np.empty(cap, np.uint8)
    stk_pos = np.empty(cap, np.uint8)

    for sysi in range(n_systems):
        sys_key = _mix64(U64(master_key) + _GAMMA * (U64(sysi) + U64(1)))
        top = 0
        stk_w[0] = abs_z
        stk_sign[0] = sign_z
        stk_b[0] = 0.0
        stk_gen[0] = 0
        stk_key[0] = _derive_child_key(sys_key, 0)
        stk_uc[0] = 1 if (C <= 0.0 or abs_z < C) else 0
        stk_pos[0] = 1 if z > 0 else 0
        top = 1
        n_cells = 0
        n_events = 0
        n_censored = 0
        n_trunc = 0
        max_top = 1
        while top > 0:
            top -= 1
            w = stk_w[top]
            sgn = stk_sign[top]
            b_u = stk_b[top]
            gen = stk_gen[top]
            key = stk_key[top]
            uc_alive = stk_uc[top]
            pos_ok = stk_pos[top]
            n_cells += 1

            s_rel = s_min / w
            c_rel = C / w if C > 0.0 else np.inf
            room = (A - b_u) / w if np.isfinite(A) else np.inf
            floor_rel = s_rel * kill_ratio
            if floor_rel > 0.25:
                floor_rel = 0.25
            dt_max = dt_big if w >= 0.05 * abs_z else dt_small

            state = U64(key)
            xi = 0.0
            V = 1.0
            c = 0.0
            child_idx = 0
            # snapshot targets in relative clock units (ascending)
            jptr = 0
            while do_snap and jptr < n_lev and snap_levels[jptr] < b_u:
                jptr += 1

            # chunk tuning
            cur0 = V
            eps = np.log1p(s_rel / (4.0 * cur0))
            if eps > eps_cap:
                eps = eps_cap
            if eps < 1e-7:
                eps = 1e-7
            mp = _tail_pos(eps)
            mn = _tail_neg(-eps)
            lam = mp + mn
            sig2, mu = _moments_at(eps, leps, sig2g, mug)
            drift = -FOUR_OVER_PI - _comp_tail(eps) + mu
            sigma = np.sqrt(sig2)

            alive = True
            while alive:
                n_events += 1
                if n_events > max_events:
                    n_trunc += 1
                    break
                state, u = _u01(state)
                gap = -np.log(u) / lam
                jump = gap <= dt_max
                if not jump:
                    gap = dt_max
                state, g = _normal(state)
                xi_new = xi + drift * gap + sigma * np.sqrt(gap) * g
                V_new = np.exp(xi_new)
                dc = 0.5 * (V + V_new) * gap
                if do_gen1 and gen == 0:
                    # Rao-Blackwell integrals: the truncated first-generation
                    # sums have conditional means, given the path,
                    #   sum x^2          : int e^{2 xi} g2(u) ds
                    #   sum x^2 ln|x|    : int e^{2 xi} [g2l(u) + xi g2(u)] ds
                    # with u = (cutoff) e^{-xi}.  Subtracting the exact-mean
                    # untruncated versions leaves integrands supported where
                    # the path is small, killing the heavy-tail noise.
                    v2a = V * V
                    v2b = V_new * V_new
                    for kk in range(3):
                        thr = s_rel * (2.0**kk)
                        ua = thr / V
                        ub = thr / V_new
                        d2a = FOUR_OVER_PI - _g2(ua)
                        d2b = FOUR_OVER_PI - _g2(ub)
                        out_gen1[sysi, 6 + kk] += 0.5 * (v2a * d2a + v2b * d2b) * gap
                        dla = (-FOUR_OVER_PI * LN2 - _g2l(ua)) + xi * d2a
                        dlb = (-FOUR_OVER_PI * LN2 - _g2l(ub)) + xi_new * d2b
                        out_gen1[sysi, 9 + kk] += 0.5 * (v2a * dla + v2b * dlb) * gap
                    # untruncated conditional-mean integrals (diagnostics)
                    out_gen1[sysi, 12] += 0.5 * (v2a + v2b) * gap
                    out_gen1[sysi, 13] += 0.5 * (
                        v2a * (FOUR_OVER_PI * (xi - LN2))
                        + v2b * (FOUR_OVER_PI * (xi_new - LN2))
                    ) * gap
                if do_snap:
                    while jptr < n_lev:
                        tgt = (snap_levels[jptr] - b_u) / w
                        if tgt > c + dc:
                            break
                        fr = (tgt - c) / dc if dc > 0.0 else 1.0
                        val = sgn * w * np.exp(xi + fr * (xi_new - xi))
                        li = jptr
                        out_alive[sysi, li] += 1
                        av = np.abs(val)
                        out_sumsq[sysi, li] += av * av
                        if pos_ok == 1 and val > 0.0:
                            out_sum52[sysi, li] += val**2.5
                        # ranked insertion by |value|
                        pos_k = K
                        for kk in range(K):
                            if av > np.abs(out_topk[sysi, li, kk]):
                                pos_k = kk
                                break
                        if pos_k < K:
                            for kk in range(K - 1, pos_k, -1):
                                out_topk[sysi, li, kk] = out_topk[sysi, li, kk - 1]
                            out_topk[sysi, li, pos_k] = val
                        jptr += 1
                c += dc
                xi = xi_new
                V = V_new
                if uc_alive == 1 and V >= c_rel:
                    uc_alive = 0
                if V < floor_rel:
                    break
                if c >= room:
                    n_censored += 1
                    break
                if jump:
                    state, y = _sample_jump(
                        state, mp, mn, s0p, dsp, ypos, s0n, dsn, yneg
                    )
                    xfac = np.expm1(y)
                    child_val = -sgn * w * V * xfac
                    child_abs = np.abs(child_val)
                    child_gen = gen + 1
                    birth_level = b_u + w * c
                    if child_abs >= s_min:
                        if do_brw and child_gen <= G_record:
                            gidx = child_gen - 1
                            la = np.log(child_abs)
                            out_brw[sysi, gidx] += child_abs * child_abs
                            out_brw[sysi, 3 + gidx] -= la * child_abs * child_abs
                            if uc_alive == 1 and child_abs < C:
                                out_brw[sysi, 6 + gidx] += (
                                    PI * child_abs * child_abs * _green_rc(child_abs / 2.0, C)
                                )
                        if do_gen1 and child_gen == 1:
                            sq = child_abs * child_abs
                            lg = np.log(child_abs)
                            for kk in range(3):
                                if child_abs >= s_min * (2.0**kk):
                                    out_gen1[sysi, 2 * kk] += sq
                                    out_gen1[sysi, 2 * kk + 1] += sq * lg
                                    out_gen1n[sysi, kk] += 1
                        if child_gen <= G_sim and birth_level < A:
                            child_uc = 1 if (uc_alive == 1 and child_abs < C) else 0
                            child_pos = 1 if (pos_ok == 1 and child_val > 0.0) else 0
                            if top >= cap:
                                cap *= 2
                                stk_w = _grow_f(stk_w, cap)
                                stk_sign = _grow_f(stk_sign, cap)
                                stk_b = _grow_f(stk_b, cap)
                                stk_gen = _grow_i(stk_gen, cap)
                                stk_key = _grow_u64(stk_key, cap)
                                stk_uc = _grow_u8(stk_uc, cap)
                                stk_pos = _grow_u8(stk_pos, cap)
                            stk_w[top] = child_abs
                            stk_sign[top] = 1.0 if child_val > 0.0 else -1.0
                            stk_b[top] = birth_level
                            stk_gen[top] = child_gen
                            child_idx += 1
                            stk_key[top] = _derive_child_key(key, child_idx)
                            stk_uc[top] = child_uc
                            stk_pos[top] = child_pos
                            top += 1
                            if top > max_top:
                                max_top = top
                    elif do_brw and uc_alive == 1 and child_gen <= G_record:
                        # expected derivative-martingale mass of the dropped
                        # subtree equals its root term, by the martingale
                        # property; credit it to every n >= child_gen - 1.
                        if child_abs > 0.0:
                            out_comp[sysi, child_gen - 1] += (
                                PI * child_abs * child_abs * _green_rc(child_abs / 2.0, C)
                            )
                    xi += y
                    V = np.exp(xi)
                    if uc_alive == 1 and V >= c_rel:
                        uc_alive = 0
                    if V < floor_rel:
                        break
                    if V > 2.0 * cur0 or V < 0.5 * cur0:
                        cur0 = V
                        eps = np.log1p(s_rel / (4.0 * cur0))
                        if eps > eps_cap:
                            eps = eps_cap
                        if eps < 1e-7:
                            eps = 1e-7
                        mp = _tail_pos(eps)
                        mn = _tail_neg(-eps)
                        lam = mp + mn
                        sig2, mu = _moments_at(eps, leps, sig2g, mug)
                        drift = -FOUR_OVER_PI - _comp_tail(eps) + mu
                        sigma = np.sqrt(sig2)
        # end while stack
        out_diag[sysi, 0] = n_cells
        out_diag[sysi, 1] = n_events
        out_diag[sysi, 2] = n_censored
        out_diag[sysi, 3] = n_trunc
    return 0
