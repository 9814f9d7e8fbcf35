import math

import numpy as np
import pytest
from scipy import stats as sps

from gfex.bridges import (
    grid_times,
    refine_excursion,
    sample_bessel3_bridge,
    sample_brownian_bridge,
    sample_cauchy_path,
    sample_duration,
    sample_excursion,
    sample_h_excursion,
)
from gfex.config import GridSpec
from gfex.errors import InvalidParameterError
from gfex.rng import philox
from gfex.stats import ks_two_sample


def test_grid_times_final_partial_step():
    t = grid_times(1.05, 0.1)
    assert t[0] == 0.0 and t[-1] == 1.05
    assert np.all(np.diff(t) > 0)
    assert np.max(np.diff(t)) <= 0.1 + 1e-15
    # exact multiple: no stray duplicate point
    t = grid_times(1.0, 0.1)
    assert len(t) == 11 and t[-1] == 1.0


def test_duration_formula_and_tail():
    # direct formula: W = 0.5, z = 1 -> r = 1
    assert 1.0 / (2.0 * 0.5) == 1.0
    rng = philox(5, 1)
    r = sample_duration(1.0, rng, size=100_000)
    w = 1.0 / (2.0 * r)
    # oracle: W must be unit-mean exponential
    assert abs(w.mean() - 1.0) <= 3.0 * w.std() / math.sqrt(len(w))
    tail = np.mean(r > 1.0)
    target = 1.0 - math.exp(-0.5)
    assert abs(tail - target) <= 3.0 * math.sqrt(target * (1 - target) / len(w))
    with pytest.raises(InvalidParameterError):
        sample_duration(0.0, rng)


def test_bridge_pinning_and_midpoint_variance():
    rng = philox(7, 2)
    t = grid_times(1.0, 0.25)  # grid containing t = 1/2
    n = 100_000
    mids = np.empty(n)
    for_scalar = sample_brownian_bridge(1.0, 0.7, t, rng)
    assert for_scalar[0] == 0.0 and for_scalar[-1] == 0.7
    # vectorized redraw for the variance oracle: bridge var at t is t(r-t)/r
    g = rng.standard_normal((n, len(t) - 1)) * np.sqrt(np.diff(t))
    b = np.cumsum(g, axis=1)
    b = np.hstack([np.zeros((n, 1)), b])
    b -= np.outer(b[:, -1], t / 1.0)
    mids = b[:, 2]  # t = 0.5
    var_target = 0.5 * (1.0 - 0.5) / 1.0
    se = np.sqrt(2.0 / (n - 1)) * var_target  # SE of a normal variance estimate
    assert abs(mids.var() - var_target) <= 3.0 * se


def test_bridge_sign_symmetry():
    rng = philox(11, 3)
    t = grid_times(1.0, 0.125)
    a = np.array([sample_brownian_bridge(1.0, 0.0, t, rng)[4] for _ in range(4000)])
    rng2 = philox(12, 3)
    b = -np.array([sample_brownian_bridge(1.0, 0.0, t, rng2)[4] for _ in range(4000)])
    d, p = ks_two_sample(a, b)
    assert p > 0.01


def test_bridge_covariance_three_point_chisquare():
    # exact Gaussian law check on a 3-point grid via the quadratic form
    r = 1.0
    tg = np.array([0.25, 0.5, 0.75])
    t = grid_times(r, 0.25)
    cov = np.minimum.outer(tg, tg) - np.outer(tg, tg) / r
    cinv = np.linalg.inv(cov)
    rng = philox(13, 4)
    n = 100_000
    g = rng.standard_normal((n, len(t) - 1)) * np.sqrt(np.diff(t))
    b = np.cumsum(g, axis=1)
    b = np.hstack([np.zeros((n, 1)), b])
    b -= np.outer(b[:, -1], t / r)
    v = b[:, 1:4]
    q = np.einsum("ni,ij,nj->n", v, cinv, v)
    stat = q.sum()
    # sum of n iid chi^2_3 ~ chi^2_{3n}
    p = sps.chi2.sf(stat, 3 * n)
    assert 0.005 < p < 0.995


def test_bessel3_bridge_moments_and_positivity():
    rng = philox(17, 5)
    t = grid_times(1.0, 0.125)
    n = 100_000
    mids = np.empty(n)
    comp = rng.standard_normal((3, n, len(t) - 1)) * np.sqrt(np.diff(t))
    b = np.cumsum(comp, axis=2)
    b = np.concatenate([np.zeros((3, n, 1)), b], axis=2)
    b -= b[:, :, -1:] * (t / 1.0)
    y = np.sqrt((b**2).sum(axis=0))
    assert np.all(y[:, 0] == 0.0) and np.all(y[:, -1] == 0.0)
    assert np.all(y[:, 1:-1] > 0)
    m2 = (y[:, 4] ** 2).mean()  # t = 1/2: E y^2 = 3 t (r - t) / r = 3/4
    se = (y[:, 4] ** 2).std() / math.sqrt(n)
    assert abs(m2 - 0.75) <= 3 * se


def test_excursion_invariants_and_determinism(grid_fast):
    p1 = sample_excursion(1.0, grid_fast)
    p2 = sample_excursion(1.0, grid_fast)
    assert np.array_equal(p1.x, p2.x) and np.array_equal(p1.y, p2.y)
    assert p1.x[0] == 0.0 and p1.x[-1] == 1.0
    assert p1.y[0] == 0.0 and p1.y[-1] == 0.0
    assert p1.y[1:-1].min() > 0
    assert np.max(np.diff(p1.times)) <= grid_fast.dt + 1e-15
    assert np.isfinite(p1.y).all() and p1.y.max() > 0


def test_excursion_duration_scaling():
    # durations at z = 2 equal 4x durations at z = 1 in law
    d1 = np.array([sample_excursion(1.0, GridSpec(dt=1e-2, seed=3, replica_index=i),
                                    max_points=50_000).duration for i in range(4000)])
    d2 = np.array([sample_excursion(2.0, GridSpec(dt=1e-2, seed=4, replica_index=i),
                                    max_points=50_000).duration for i in range(4000)])
    _, p = ks_two_sample(4.0 * d1, d2)
    assert p > 0.01


def test_refinement_preserves_law():
    # refined coarse paths vs directly fine-sampled paths: same bridge law
    n = 3000
    mid_refined = np.empty(n)
    mid_direct = np.empty(n)
    for i in range(n):
        g = GridSpec(dt=0.5, seed=21, replica_index=i)
        p = sample_excursion(1.0, g, keep_components=True, duration=1.0)
        rng = philox(22, i)
        p2 = refine_excursion(p, rng)
        mid_refined[i] = p2.x[1]  # t = 0.25 after one refinement of dt=0.5
        gd = GridSpec(dt=0.25, seed=23, replica_index=i)
        pd = sample_excursion(1.0, gd, duration=1.0)
        mid_direct[i] = pd.x[1]
    _, p = ks_two_sample(mid_refined, mid_direct)
    assert p > 0.01


def test_cauchy_path_quartiles_and_symmetry(grid_fast):
    cp = sample_cauchy_path(0.0, 1.0, grid_fast)
    assert cp.values[0] == 0.0
    n = 100_000
    rng = philox(31, 9)
    u = rng.random(n)
    inc = 2.0 * 1.0 * np.tan(np.pi * (u - 0.5))
    # oracle: P(|inc| > 2t) = 1/2 at t = 1 by the arctan CDF
    frac = np.mean(np.abs(inc) > 2.0)
    assert abs(frac - 0.5) <= 3.0 * math.sqrt(0.25 / n)
    # quartiles of the scale-2 Cauchy at +-2 tan(pi/4) = +-2
    q1, q3 = np.quantile(inc, [0.25, 0.75])
    assert abs(q1 + 2.0) < 0.05 and abs(q3 - 2.0) < 0.05
    med = np.median(inc)
    assert abs(med) < 0.03


def test_cauchy_concatenation_in_law():
    # two half-horizon paths glued vs one full-horizon path
    n = 4000
    ends_glued = np.empty(n)
    ends_full = np.empty(n)
    for i in range(n):
        g1 = GridSpec(level_da=1e-2, seed=41, replica_index=i)
        g2 = GridSpec(level_da=1e-2, seed=42, replica_index=i)
        c1 = sample_cauchy_path(0.0, 0.5, g1)
        c2 = sample_cauchy_path(c1.values[-1], 0.5, g2)
        ends_glued[i] = c2.values[-1]
        gf = GridSpec(level_da=1e-2, seed=43, replica_index=i)
        ends_full[i] = sample_cauchy_path(0.0, 1.0, gf).values[-1]
    _, p = ks_two_sample(ends_glued, ends_full)
    assert p > 0.01


def test_h_excursion_hitting_time_and_symmetry():
    n = 20_000
    hits = np.empty(n)
    xs = np.empty(n)
    for i in range(n):
        g = GridSpec(dt=1e-3, seed=51, replica_index=i)
        h = sample_h_excursion(0.0, 1.0, g)
        assert not h.truncated
        assert h.y[-1] >= 1.0
        hits[i] = h.hit_time
        xs[i] = h.x_at_hit
    # optional stopping on y^2 - 3t: E[T_a] = a^2 / 3
    se = hits.std() / math.sqrt(n)
    assert abs(hits.mean() - 1.0 / 3.0) <= 3 * se + 1e-3  # + one-step bias room
    _, p = ks_two_sample(xs, -xs)
    assert p > 0.01
