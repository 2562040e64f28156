"""Gas algebra: closed-form anchors and branch-inversion properties.

For A=1/2, gamma=2 the algebra collapses to closed forms used as oracles:
h(rho) = rho, rho_max(s) = s, rho_crit(s) = 2s/3, Gamma(s) = sqrt(2s/3),
Sigma(s) = (2s/3)**1.5.  For the isothermal law with c=1: h = ln(rho),
rho_max = e**s, rho_crit = e**(s-1/2), Gamma = 1, Sigma = e**(s-1/2).
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nozzleflow import gas as G

POLY = G.GasLaw.polytropic(0.5, 2.0)
ISO = G.GasLaw.isothermal(1.0)


def test_enthalpy_closed_form_polytropic():
    # A*gamma/(gamma-1) = 1, so h(rho) = rho identically
    assert G.enthalpy(POLY, 1.3) == pytest.approx(1.3, abs=1e-14)
    assert G.enthalpy(POLY, 0.0) == 0.0


def test_enthalpy_isothermal_normalization():
    assert G.enthalpy(ISO, 1.0) == 0.0
    assert G.enthalpy(ISO, math.e) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(G.GasDomainError):
        G.enthalpy(ISO, 0.0)


def test_b0_flag():
    assert POLY.b0 == 0.0
    assert math.isinf(ISO.b0) and ISO.b0 < 0


def test_critical_state_polytropic_anchor():
    st_ = G.critical_state(POLY, 1.5)
    assert st_.rho_max == pytest.approx(1.5, rel=1e-12)
    assert st_.rho_crit == pytest.approx(1.0, rel=1e-12)
    assert st_.speed == pytest.approx(1.0, rel=1e-12)
    assert st_.flux == pytest.approx(1.0, rel=1e-12)


def test_critical_state_polytropic_s3():
    st_ = G.critical_state(POLY, 3.0)
    assert st_.rho_crit == pytest.approx(2.0, rel=1e-12)
    assert st_.flux == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-12)


def test_critical_state_isothermal():
    assert G.stagnation_density(ISO, 0.5) == pytest.approx(math.exp(0.5), rel=1e-12)
    st_ = G.critical_state(ISO, 3.0)
    assert st_.rho_crit == pytest.approx(math.exp(2.5), rel=1e-12)
    assert st_.speed == pytest.approx(1.0, rel=1e-12)
    assert st_.flux == pytest.approx(math.exp(2.5), rel=1e-12)


@pytest.mark.parametrize("gas", [POLY, ISO], ids=["poly", "iso"])
def test_critical_defining_residuals(gas):
    # the defining equations hold to 1e-13 relative on a Bernoulli grid
    s = np.linspace(0.7, 4.0, 23)
    rb = G.stagnation_density(gas, s)
    rc = G.sonic_density(gas, s)
    assert np.max(np.abs(G.enthalpy(gas, rb) - s)) <= 1e-13 * np.max(np.abs(s))
    res = G.enthalpy(gas, rc) + 0.5 * G.sound_speed_sq(gas, rc) - s
    assert np.max(np.abs(res)) <= 1e-13 * np.max(np.abs(s))


@pytest.mark.parametrize("gas", [POLY, ISO], ids=["poly", "iso"])
def test_sigma_monotone(gas):
    s = np.linspace(0.6, 5.0, 200)
    sig = G.critical_flux(gas, s)
    assert np.all(np.diff(sig) > 0.0)


@pytest.mark.parametrize("gas", [POLY, ISO], ids=["poly", "iso"])
def test_sigma_derivative_matches_central_difference(gas):
    ds = 1e-6
    for s in (0.8, 1.5, 2.7):
        fd = (G.critical_flux(gas, s + ds) - G.critical_flux(gas, s - ds)) / (2 * ds)
        assert G.critical_flux_deriv(gas, s) == pytest.approx(fd, rel=1e-6)


def test_momentum_sq_anchors():
    assert G.momentum_sq(POLY, 1.25, 1.5) == pytest.approx(0.78125, rel=1e-13)
    # maximum at the critical density equals Sigma**2, zero at rho_max
    assert G.momentum_sq(POLY, 1.0, 1.5) == pytest.approx(1.0, rel=1e-13)
    assert G.momentum_sq(POLY, 1.5, 1.5) == pytest.approx(0.0, abs=1e-14)


def test_momentum_sq_domain_errors():
    with pytest.raises(G.GasDomainError):
        G.momentum_sq(POLY, 1.6, 1.5)
    with pytest.raises(G.GasDomainError):
        G.momentum_sq(POLY, 0.0, 1.5)


def test_momentum_shape_around_critical():
    s = 1.5
    rho = np.linspace(0.05, G.stagnation_density(POLY, s), 400)
    I = G.momentum_sq(POLY, rho, s)
    rc = G.sonic_density(POLY, s)
    left = rho < rc
    assert np.all(np.diff(I[left]) > 0.0)
    right = rho > rc * (1 + 1e-9)
    assert np.all(np.diff(I[right]) < 0.0)


def test_subsonic_density_anchor():
    # cubic 2*rho^2*(1.5-rho) = 1/2 has subsonic root (1+sqrt(3))/2
    val = G.subsonic_density(POLY, 0.5, 1.5)
    assert val == pytest.approx((1.0 + math.sqrt(3.0)) / 2.0, rel=1e-12)


def test_subsonic_density_endpoints():
    assert G.subsonic_density(POLY, 0.0, 1.5) == pytest.approx(1.5, rel=1e-13)
    # sonic endpoint returned by continuous extension, not an error
    assert G.subsonic_density(POLY, 1.0, 1.5) == pytest.approx(1.0, rel=1e-13)


def test_subsonic_density_supersonic_raises():
    with pytest.raises(G.SupersonicStateError):
        G.subsonic_density(POLY, 1.0 + 1e-6, 1.5)
    with pytest.raises(G.GasDomainError):
        G.subsonic_density(POLY, -0.1, 1.5)


@pytest.mark.parametrize("gas", [POLY, ISO], ids=["poly", "iso"])
def test_round_trip_bulk(gas):
    rng = np.random.default_rng(1234)
    s = rng.uniform(0.7, 4.0, 5000)
    rc = G.sonic_density(gas, s)
    rb = G.stagnation_density(gas, s)
    rho = rc + rng.uniform(0.0, 1.0, s.size) * (rb - rc)
    back = G.subsonic_density(gas, G.momentum_sq(gas, rho, s), s)
    assert np.max(np.abs(back - rho) / rho) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(
    s=st.floats(min_value=0.7, max_value=4.0),
    t=st.floats(min_value=0.001, max_value=0.999),
)
def test_round_trip_property(s, t):
    rc = G.sonic_density(POLY, s)
    rb = G.stagnation_density(POLY, s)
    rho = rc + t * (rb - rc)
    back = G.subsonic_density(POLY, G.momentum_sq(POLY, rho, s), s)
    assert abs(back - rho) <= 1e-10 * rho


def test_vectorized_paths_match_scalar():
    s = np.array([1.5, 1.5, 3.0])
    msq = np.array([0.78125, 0.5, 2.0])
    vec = G.subsonic_density(POLY, msq, s)
    for k in range(3):
        assert vec[k] == G.subsonic_density(POLY, float(msq[k]), float(s[k]))
