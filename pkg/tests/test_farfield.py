"""Far-field states: anchors, independent root oracles, conservation laws."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from nozzleflow import farfield as FF
from nozzleflow import gas as G

POLY = G.GasLaw.polytropic(0.5, 2.0)
M_UNIFORM = 1.25 / math.sqrt(2.0)


@pytest.fixture(scope="module")
def b_const():
    return FF.BernoulliProfile.constant(1.5)


@pytest.fixture(scope="module")
def b_var():
    # B = 3/2 + 0.01*(x2 - 1/2)**2
    return FF.BernoulliProfile.from_coeffs([1.5025, -0.01, 0.01])


@pytest.fixture(scope="module")
def ff_widening(b_const):
    return FF.solve_farfield(POLY, b_const, M_UNIFORM, 0.0, 2.0)


def test_upstream_uniform_anchor(b_const):
    up = FF.solve_upstream(POLY, b_const, M_UNIFORM)
    assert up.rho0 == pytest.approx(1.25, abs=1e-12)
    x = np.linspace(0, 1, 7)
    assert np.max(np.abs(up.u0(x) - 1.0 / math.sqrt(2.0))) < 1e-12
    assert np.max(np.abs(up.u0_prime(x))) < 1e-12


def test_upstream_rejects_excessive_flux(b_const):
    # maximum subsonic flux for B=3/2 is Sigma(3/2) = 1
    with pytest.raises(FF.FarFieldError):
        FF.solve_upstream(POLY, b_const, 1.2)


def test_upstream_choked_fallback(b_const):
    up = FF.solve_upstream(POLY, b_const, 1.2, allow_choked=True)
    assert up.choked
    assert up.rho0 == pytest.approx(1.0, rel=1e-12)  # sonic density at s=3/2


def test_upstream_monotone_in_m(b_const):
    ms = np.linspace(0.2, 0.95, 8)
    rhos = [FF.solve_upstream(POLY, b_const, float(m)).rho0 for m in ms]
    assert np.all(np.diff(rhos) < 0.0)


def test_upstream_variable_b_against_trapezoid_oracle(b_var):
    # independent oracle: 1e6-point trapezoid flux + brentq on the window
    xo = np.linspace(0.0, 1.0, 1_000_001)
    Bx = b_var(xo)

    def flux(r):
        return np.trapezoid(r * np.sqrt(np.maximum(2.0 * (Bx - r), 0.0)), xo)

    lo = G.sonic_density(POLY, b_var.b_max)
    hi = G.stagnation_density(POLY, b_var.b_min)
    oracle = brentq(lambda r: flux(r) - M_UNIFORM, lo, hi, xtol=1e-14)
    assert abs(oracle - 1.25) < 3e-3  # perturbation shifts rho0 only slightly
    up = FF.solve_upstream(POLY, b_var, M_UNIFORM)
    assert up.rho0 == pytest.approx(oracle, abs=1e-9)


def test_upstream_flux_consistency(b_var):
    up = FF.solve_upstream(POLY, b_var, M_UNIFORM)
    x = np.linspace(0.0, 1.0, 200_001)
    total = np.trapezoid(up.rho0 * up.u0(x), x)
    assert total == pytest.approx(M_UNIFORM, rel=1e-10)


def test_downstream_widening_against_bisection_oracle(ff_widening):
    # constant B: height relation collapses to rho1*sqrt(2*(1.5-rho1)) = m/2
    oracle = brentq(
        lambda r: r * math.sqrt(2.0 * (1.5 - r)) - M_UNIFORM / 2.0, 1.0, 1.5, xtol=1e-15
    )
    assert ff_widening.rho1 == pytest.approx(oracle, abs=1e-10)
    u1_mid = ff_widening.u1(1.0)
    assert u1_mid == pytest.approx(math.sqrt(2.0 * (1.5 - oracle)), abs=1e-9)
    assert abs(ff_widening.ymap(0.5) - 1.0) <= 1e-9


def test_downstream_trivial_strip(b_const):
    up = FF.solve_upstream(POLY, b_const, M_UNIFORM)
    down = FF.solve_downstream(POLY, b_const, up, M_UNIFORM, 0.0, 1.0)
    assert down.rho1 == pytest.approx(up.rho0, abs=1e-11)
    s = np.linspace(0, 1, 11)
    assert np.max(np.abs(down.ymap(s) - s)) < 1e-10


def test_downstream_too_narrow_raises(b_const):
    up = FF.solve_upstream(POLY, b_const, M_UNIFORM)
    # strip of width 0.5 cannot pass m = 0.884 subsonically (max flux Sigma/2)
    with pytest.raises(FF.FarFieldError):
        FF.solve_downstream(POLY, b_const, up, M_UNIFORM, 0.0, 0.5)


def test_downstream_mass_conservation(ff_widening):
    y = np.linspace(0.0, 2.0, 200_001)
    total = np.trapezoid(ff_widening.rho1 * ff_widening.u1(y), y)
    assert total == pytest.approx(M_UNIFORM, rel=1e-8)


def test_flow_map_consistency(b_var):
    # rho1*u1(y(s))*dy/ds = rho0*u0(s): mass flux between streamlines
    ff = FF.solve_farfield(POLY, b_var, M_UNIFORM, 0.0, 2.0)
    s = np.linspace(0.05, 0.95, 19)
    ds = 1e-6
    dyds = (ff.ymap(s + ds) - ff.ymap(s - ds)) / (2.0 * ds)
    lhs = ff.rho1 * ff.u1(ff.ymap(s)) * dyds
    rhs = ff.rho0 * ff.u0(s)
    assert np.max(np.abs(lhs - rhs)) < 1e-7


def test_bernoulli_conserved_along_flow_map(b_var):
    ff = FF.solve_farfield(POLY, b_var, M_UNIFORM, 0.0, 2.0)
    s = np.linspace(0.0, 1.0, 41)
    up_val = G.enthalpy(POLY, ff.rho0) + 0.5 * np.asarray(ff.u0(s)) ** 2
    dn_val = G.enthalpy(POLY, ff.rho1) + 0.5 * np.asarray(ff.u1(ff.ymap(s))) ** 2
    assert np.max(np.abs(up_val - dn_val)) < 1e-9


def test_stream_profiles_uniform(ff_widening):
    ff = ff_widening
    psi = np.linspace(0.0, M_UNIFORM, 17)
    assert np.max(np.abs(ff.kappa(psi) - psi / M_UNIFORM)) < 1e-11
    assert np.max(np.abs(ff.F(psi) - 1.0 / math.sqrt(2.0))) < 1e-11
    assert np.max(np.abs(ff.Fprime(psi))) < 1e-11
    assert ff.psi_upstream(0.5) == pytest.approx(M_UNIFORM / 2.0, abs=1e-12)
    assert ff.psi_downstream(1.0) == pytest.approx(M_UNIFORM / 2.0, abs=1e-9)


def test_stream_profile_chain_rule_variable_b(b_var):
    ff = FF.solve_farfield(POLY, b_var, M_UNIFORM, 0.0, 1.0)
    # oracle: dense cumulative flux locates kappa(m/2); then
    # F'(psi) = u0'(kappa)/(rho0*u0(kappa)) with u0' = B'/u0
    x = np.linspace(0.0, 1.0, 1_000_001)
    flux = ff.rho0 * np.asarray(ff.u0(x))
    psi = np.concatenate(([0.0], np.cumsum(0.5 * (flux[1:] + flux[:-1]) * np.diff(x))))
    k_oracle = np.interp(M_UNIFORM / 2.0, psi, x)
    u0k = float(ff.u0(k_oracle))
    expected = b_var.deriv(k_oracle) / u0k / (ff.rho0 * u0k)
    assert ff.Fprime(M_UNIFORM / 2.0) == pytest.approx(expected, rel=1e-6)
    assert ff.kappa(M_UNIFORM / 2.0) == pytest.approx(k_oracle, abs=1e-8)


def test_profiles_monotone_and_pinned(b_var):
    ff = FF.solve_farfield(POLY, b_var, M_UNIFORM, 0.0, 1.0)
    x = np.linspace(0.0, 1.0, 1001)
    psis = ff.psi_upstream(x)
    assert np.all(np.diff(psis) > 0.0)
    assert ff.psi_upstream(0.0) == 0.0
    assert ff.psi_upstream(1.0) == pytest.approx(M_UNIFORM, abs=1e-14)
    assert ff.F(0.0) == pytest.approx(float(ff.u0(0.0)), abs=1e-10)
    assert ff.F(M_UNIFORM) == pytest.approx(float(ff.u0(1.0)), abs=1e-10)


def _synthetic_profiles(m: float):
    # F(s) = 0.04 + 0.1*s**2 has F'(0) = 0 and F'(m) = 0.2 for m = 1
    return FF.StreamProfiles(
        kappa=lambda s: s / m,
        F=lambda s: 0.04 + 0.1 * np.asarray(s, dtype=float) ** 2,
        Fprime=lambda s: 0.2 * np.asarray(s, dtype=float),
        psi_upstream=lambda x: m * np.asarray(x, dtype=float),
    )


def test_extension_tail_values():
    m = 1.0
    fext, fext_prime = FF.extend_profiles(_synthetic_profiles(m), m)
    # linear decay over [m, 2m]: slope F'(m) = 0.2 halves at s = 1.5m
    assert fext_prime(1.5 * m) == pytest.approx(0.1, abs=1e-12)
    assert fext_prime(2.5 * m) == 0.0
    assert fext_prime(-1.5 * m) == 0.0
    # area under the decay triangle: Fext(2m) = F(m) + F'(m)*m/2
    assert fext(2.0 * m) == pytest.approx(0.14 + 0.1, abs=1e-12)
    assert fext(10.0 * m) == fext(2.0 * m)
    assert fext(-10.0 * m) == pytest.approx(0.04, abs=1e-12)  # F(0) - F'(0)*m/2


def test_extension_matches_inside(b_var):
    ff = FF.solve_farfield(POLY, b_var, M_UNIFORM, 0.0, 1.0)
    psi = np.linspace(0.0, M_UNIFORM, 301)
    assert np.max(np.abs(ff.Fext(psi) - ff.F(psi))) == 0.0
    assert np.max(np.abs(ff.Fext_prime(psi) - ff.Fprime(psi))) == 0.0


def test_extension_lipschitz_bound():
    m = 1.0
    fext, fext_prime = FF.extend_profiles(_synthetic_profiles(m), m)
    s = np.linspace(-2.0 * m, 3.0 * m, 20001)
    g = fext_prime(s)
    slopes = np.abs(np.diff(g) / np.diff(s))
    bound = max(0.2, 0.2 / m, 0.0)  # max(Lip F', |F'(m)|/m, |F'(0)|/m)
    assert np.max(slopes) <= bound * (1.0 + 1e-6) + 1e-12


def test_extension_continuity_at_seams():
    m = 1.0
    fext, fext_prime = FF.extend_profiles(_synthetic_profiles(m), m)
    for seam in (-m, 0.0, m, 2.0 * m):
        eps = 1e-9
        assert fext(seam - eps) == pytest.approx(fext(seam + eps), abs=1e-7)
        assert fext_prime(seam - eps) == pytest.approx(fext_prime(seam + eps), abs=1e-7)


def test_check_assumptions_clean(b_const):
    rep = FF.check_assumptions(POLY, b_const, 0.5)
    assert rep.delta == 0.0
    assert rep.ok
    assert rep.messages == []


def test_check_assumptions_small_m(b_var):
    rep = FF.check_assumptions(POLY, b_var, 0.2)
    assert rep.delta == pytest.approx(0.02, rel=1e-6)
    assert rep.m_threshold == pytest.approx(0.02**0.25, rel=1e-6)
    assert rep.inlet_slope_ok and rep.outlet_slope_ok
    assert not rep.m_above_threshold
    assert not rep.ok
    assert any("delta" in msg for msg in rep.messages)
    # advisory only: the far-field itself still solves
    assert rep.upstream_solvable and rep.downstream_solvable


def test_check_assumptions_infeasible_m(b_const):
    rep = FF.check_assumptions(POLY, b_const, 1.2)
    assert not rep.upstream_solvable
    assert not rep.ok


def test_bernoulli_profile_validation():
    with pytest.raises(FF.FarFieldError):
        FF.BernoulliProfile.from_table([0.0, 0.4], [1.5, 1.6])  # does not cover [0,1]
    with pytest.raises(FF.FarFieldError):
        FF.BernoulliProfile.from_coeffs([])


def test_isothermal_farfield_roundtrip():
    gi = G.GasLaw.isothermal(1.0)
    B = FF.BernoulliProfile.constant(0.5)
    ff = FF.solve_farfield(gi, B, 0.7, 0.0, 1.0)
    # uniform flow: rho0*sqrt(2*(0.5 - ln rho0)) = 0.7
    oracle = brentq(
        lambda r: r * math.sqrt(2.0 * (0.5 - math.log(r))) - 0.7,
        G.sonic_density(gi, 0.5),
        G.stagnation_density(gi, 0.5),
        xtol=1e-15,
    )
    assert ff.rho0 == pytest.approx(oracle, abs=1e-11)
    assert ff.rho1 == pytest.approx(oracle, abs=1e-10)
