import math

import numpy as np
import pytest
from scipy.integrate import quad

from gfex.config import LN2, LevyConfig
from gfex.errors import DomainError, InvalidParameterError
from gfex.levy import (
    compensator_tail,
    invert_jump_neg,
    invert_jump_pos,
    jump_rate,
    jump_tables,
    levy_density,
    levy_increment_params,
    psi,
    psi_prime,
    sample_levy_xi,
    sample_xi_terminal,
    small_jump_moments,
    tail_mass_neg,
    tail_mass_pos,
)
from gfex.rng import philox


def test_density_support_and_values():
    assert levy_density(-LN2) == 0.0
    assert levy_density(-LN2 - 0.1) == 0.0
    assert levy_density(0.0) == math.inf
    # y = ln 2: (2/pi) * (1/2) / 1 = 1/pi
    assert np.isclose(levy_density(LN2), 1.0 / math.pi, rtol=1e-14)
    # y^2 * density -> 2/pi at 0
    for y in (1e-6, -1e-6):
        assert np.isclose(y * y * levy_density(y), 2.0 / math.pi, rtol=1e-4)


def test_psi_exact_values():
    # exact anchors: the compensated integrand vanishes at q = 1, is
    # e^{-y} at q = 2, and e^{-2y} at q = -1
    assert psi(0.0) == 0.0
    assert abs(psi(1.0) + 4.0 / math.pi) < 1e-11
    assert abs(psi(2.0) + 4.0 / math.pi) < 1e-11
    assert abs(psi(-1.0) - 8.0 / math.pi) < 1e-11
    with pytest.raises(DomainError):
        psi(3.0)


def test_psi_convex_and_divergent_near_three():
    qs = np.linspace(-1.0, 2.9, 14)
    vals = [psi(q) for q in qs]
    second = np.diff(vals, 2)
    assert np.all(second > 0)  # Laplace exponents are convex
    # |psi| grows without bound approaching the integrability edge
    seq = [abs(psi(q)) for q in (2.9, 2.99, 2.999)]
    assert seq[0] < seq[1] < seq[2]
    assert psi(2.999) > 100  # divergence is to +infinity


def test_tail_masses_match_quadrature():
    for eps in (0.1, 0.01, 1e-3):
        qp, _ = quad(levy_density, eps, 40.0, limit=300)
        qn, _ = quad(levy_density, -LN2 + 1e-14, -eps, limit=300)
        assert np.isclose(tail_mass_pos(eps), qp, rtol=1e-8)
        assert np.isclose(tail_mass_neg(-eps), qn, rtol=1e-8)
    with pytest.raises(InvalidParameterError):
        jump_rate(LN2)


def test_compensator_closed_form():
    for eps in (0.2, 1e-2):
        q1, _ = quad(lambda y: np.expm1(y) * levy_density(y), eps, 40.0, limit=300)
        q2, _ = quad(lambda y: np.expm1(y) * levy_density(y), -LN2 + 1e-14, -eps,
                     limit=300)
        assert np.isclose(compensator_tail(eps), q1 + q2, rtol=1e-7, atol=1e-10)


def test_inverse_tables_roundtrip():
    t = jump_tables()
    for y0 in (1e-3, 0.05, 0.7, 3.0):
        m = tail_mass_pos(y0)
        assert np.isclose(invert_jump_pos(m), y0, rtol=2e-3)
    for y1 in (-1e-3, -0.05, -0.4, -0.67):
        m = tail_mass_neg(y1)
        assert np.isclose(invert_jump_neg(m), y1, rtol=2e-3, atol=1e-5)


def test_sampler_jump_rate_and_support():
    cfg = LevyConfig(eps=0.1)
    rng = philox(71, 1)
    horizon = 200.0
    lp = sample_levy_xi(horizon, cfg, rng)
    lam = jump_rate(0.1)
    n_j = len(lp.jumps)
    assert abs(n_j / horizon - lam) <= 3.0 * math.sqrt(lam / horizon)
    assert np.all(lp.jumps[:, 1] > -LN2)
    assert np.all(np.abs(lp.jumps[:, 1]) >= 0.1 * 0.98)
    assert lp.xi[0] == 0.0
    assert np.all(np.diff(lp.times) >= 0)


def test_terminal_laplace_exponent_small():
    cfg = LevyConfig(eps=1e-3)
    rng = philox(72, 2)
    n = 30_000
    vals = sample_xi_terminal(1.0, cfg, rng, n)
    for q in (1.0, 2.0):
        e = np.exp(q * vals)
        lm = math.log(e.mean())
        se = e.std() / e.mean() / math.sqrt(n)
        assert abs(lm - psi(q)) <= 4.0 * se + 5e-3


def test_moment_match_of_increments():
    # empirical mean of xi_1 ~ psi'(0)
    cfg = LevyConfig(eps=1e-3)
    rng = philox(73, 3)
    vals = sample_xi_terminal(1.0, cfg, rng, 40_000)
    target = psi_prime(0.0)
    se = vals.std() / math.sqrt(len(vals))
    assert abs(vals.mean() - target) <= 3.5 * se


def test_small_jump_moments_sensible():
    s2, mu = small_jump_moments(1e-3)
    # near 0 the density is ~ (2/pi) y^{-2}: variance ~ (4/pi) eps
    assert np.isclose(s2, 4.0 / math.pi * 1e-3, rtol=2e-3)
    assert mu < 0 and abs(mu + s2 / 2) < 2e-7  # mu ~ -sigma^2/2 to leading order
