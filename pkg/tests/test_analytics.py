import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from gfex.analytics import (
    cumulant_grid,
    estimate_M_a,
    find_roots,
    green_RC,
    kappa,
    kappa_closed,
    kappa_signed,
    mu_z_check,
    phi_plus,
)
from gfex.errors import DomainError, InsufficientSampleError
from gfex.levy import psi_prime
from gfex.rng import philox


def test_kappa_special_values():
    assert abs(kappa(2.0) + 2.0 / math.pi) < 1e-10
    assert abs(kappa(1.5)) < 1e-10
    assert abs(kappa(2.5)) < 1e-10
    with pytest.raises(DomainError):
        kappa(1.0)
    with pytest.raises(DomainError):
        kappa(3.0)


def test_kappa_closed_form_values():
    assert np.isclose(kappa_closed(2.0), -2.0 / math.pi, rtol=1e-15)
    assert kappa_closed(1.5) == 0.0
    assert kappa_closed(2.5) == 0.0
    assert np.isclose(kappa_closed(1.75), kappa(1.75), atol=1e-8)
    with pytest.raises(DomainError):
        kappa_closed(1.0)


def test_kappa_grid_agreement():
    g = cumulant_grid()
    assert g.max_abs_diff <= 1e-6
    assert abs(g.omega_minus - 1.5) < 1e-6
    assert abs(g.omega_plus - 2.5) < 1e-6
    assert kappa(2.0) < 0  # root bracketing sanity


def test_phi_plus_values_and_consistency():
    assert phi_plus(0.0) == 0.0
    assert abs(phi_plus(-0.5) + 2.0 / math.pi) < 1e-12
    for q in (-1.2, -0.6, 0.3):
        assert abs(phi_plus(q) - kappa(q + 2.5)) < 1e-6
    with pytest.raises(DomainError):
        phi_plus(0.5)


def test_signed_cumulant_criticality():
    # the signed system's cumulant has a double root at 2
    assert abs(kappa_signed(2.0)) < 1e-8
    h = 1e-4
    deriv = (kappa_signed(2.0 + h) - kappa_signed(2.0 - h)) / (2 * h)
    assert abs(deriv) < 1e-5
    # equivalently psi'(2) = (4/pi) ln 2
    assert abs(psi_prime(2.0) - 4.0 / math.pi * math.log(2.0)) < 1e-6


def test_green_function_shape():
    C = 2.0
    assert green_RC(C / 2, C) == 0.0
    assert green_RC(-C / 2, C) == 0.0
    assert green_RC(0.0, C) == math.inf
    assert green_RC(0.3, C) == green_RC(-0.3, C)
    vals = [green_RC(zv, C) for zv in (0.1, 0.3, 0.6, 0.9)]
    assert np.all(np.diff(vals) < 0)
    # log singularity at the origin: R_C(z) + ln(z)/(2 pi) stays bounded
    r1 = green_RC(1e-3, 4.0) + math.log(1e-3) / (2 * math.pi)
    r2 = green_RC(1e-4, 4.0) + math.log(1e-4) / (2 * math.pi)
    assert abs(r1 - r2) < 0.3
    with pytest.raises(DomainError):
        green_RC(1.5, 2.0)


@given(st.floats(min_value=0.01, max_value=0.99))
@settings(max_examples=40, deadline=None)
def test_green_even_property(frac):
    C = 3.7
    z = frac * C / 2
    assert np.isclose(green_RC(z, C), green_RC(-z, C), rtol=1e-12)


def test_estimate_M_a_report():
    rng = philox(5, 9)
    vals = rng.standard_exponential(4000)  # mean 1 stand-in sample
    rep = estimate_M_a(vals, z=1.0, a=0.3, seed=3)
    assert rep.target == 1.0
    assert abs(rep.mean - 1.0) < 4 * rep.ci.se
    assert rep.ci.lo < rep.mean < rep.ci.hi
    assert not rep.vacuous
    rep0 = estimate_M_a(np.zeros(100), z=1.0, a=9.0, seed=3)
    assert rep0.vacuous and rep0.mean == 0.0


def test_mu_z_check_weights_and_ess_guard():
    rng = philox(6, 10)
    x = rng.standard_normal(5000)
    w = np.ones(5000)
    rep = mu_z_check(x, w, rng.standard_normal(5000), z=1.0, a=0.5, seed=1)
    assert abs(rep.mean_weight - 1.0) < 1e-12
    assert rep.ks["p"] > 0.01
    with pytest.raises(InsufficientSampleError):
        bad_w = np.zeros(5000)
        bad_w[:5] = 1.0
        mu_z_check(x, bad_w, x, z=1.0, a=0.5)


def test_find_roots_uses_numeric_route():
    om, op = find_roots(tol=1e-9)
    assert abs(om - 1.5) < 1e-7 and abs(op - 2.5) < 1e-7
