"""Tests for the critical mass flux search."""

import numpy as np
import pytest

from nozzleflow.critical import (
    CriticalResult,
    CriticalSearchError,
    MarginSample,
    evaluate_mass_flux,
    find_critical,
    margin_curve,
)
from nozzleflow.farfield import BernoulliProfile
from nozzleflow.gas import GasLaw, critical_flux
from nozzleflow.geometry import build_nozzle

POLY = GasLaw.polytropic(0.5, 2.0)
ISO = GasLaw.isothermal(1.0)
STRAIGHT = build_nozzle("straight")
COARSE = dict(n_xi=81, n_eta=11)

_cache = {}


def straight_bracket(key, gas, bval):
    if key not in _cache:
        B = BernoulliProfile.constant(bval)
        _cache[key] = find_critical(gas, B, STRAIGHT, **COARSE)
    return _cache[key]


def test_margin_anchors_straight():
    # uniform flow through the strip: margin is exactly m^2 - Sigma^2
    B = BernoulliProfile.constant(1.5)
    samples = margin_curve(POLY, B, STRAIGHT, [0.2, 0.5, 0.8], **COARSE)
    for s, expect in zip(samples, [-0.96, -0.75, -0.36]):
        assert s.accepted
        assert s.reason == "ok"
        assert s.converged
        assert not s.truncation_active
        assert s.margin == pytest.approx(expect, abs=1e-9)


def test_margin_curve_infeasible_flux():
    B = BernoulliProfile.constant(1.5)
    (s,) = margin_curve(POLY, B, STRAIGHT, [1.05], **COARSE)
    assert not s.accepted
    assert s.reason == "farfield"
    assert s.margin is None
    assert "exceeds" in s.detail


def test_margin_rejection_near_threshold():
    # just below the exact threshold the margin test rejects first
    B = BernoulliProfile.constant(1.5)
    eps_accept = 1e-3
    s = evaluate_mass_flux(POLY, B, STRAIGHT, 0.9999, eps_accept, **COARSE)
    assert not s.accepted
    assert s.reason in ("margin", "truncated")
    assert s.converged


def test_bracket_contains_exact_threshold_polytropic():
    res = straight_bracket("poly", POLY, 1.5)
    sigma = float(critical_flux(POLY, 1.5))
    assert sigma == pytest.approx(1.0, abs=1e-14)
    assert res.width <= 0.02
    assert res.m_lo <= sigma <= res.m_hi
    assert res.m_lo <= res.m_hat <= res.m_hi


def test_bracket_contains_exact_threshold_isothermal():
    res = straight_bracket("iso", ISO, 0.5)
    sigma = float(critical_flux(ISO, 0.5))
    assert sigma == pytest.approx(1.0, abs=1e-14)
    assert res.width <= 0.02
    assert res.m_lo <= sigma <= res.m_hi


def test_bracket_frontier_reasons():
    # every accepted sample sits below every rejected one, and the
    # accepted ones carry strictly negative margins
    res = straight_bracket("poly", POLY, 1.5)
    acc = [s for s in res.samples if s.accepted]
    rej = [s for s in res.samples if not s.accepted]
    assert acc and rej
    assert max(s.m for s in acc) < min(s.m for s in rej)
    assert all(s.margin < 0.0 for s in acc)
    assert all(s.reason == "ok" for s in acc)
    assert res.m_lo == pytest.approx(max(s.m for s in acc))
    assert res.m_hi == pytest.approx(min(s.m for s in rej))


def test_search_is_deterministic():
    res1 = straight_bracket("poly", POLY, 1.5)
    B = BernoulliProfile.constant(1.5)
    res2 = find_critical(POLY, B, STRAIGHT, **COARSE)
    assert res2.m_lo == res1.m_lo
    assert res2.m_hi == res1.m_hi
    assert [s.m for s in res2.samples] == [s.m for s in res1.samples]


def test_start_above_threshold_shrinks_down():
    # an infeasible starting flux must walk down to an accepted one
    B = BernoulliProfile.constant(1.5)
    res = find_critical(POLY, B, STRAIGHT, m_start=1.8, **COARSE)
    assert res.m_lo <= 1.0 <= res.m_hi
    assert not res.samples[0].accepted


def test_no_accepted_flux_raises():
    B = BernoulliProfile.constant(1.5)
    with pytest.raises(CriticalSearchError, match="no accepted"):
        find_critical(POLY, B, STRAIGHT, m_start=1.8, max_expand=2, **COARSE)


def test_custom_tolerance_narrows_bracket():
    B = BernoulliProfile.constant(1.5)
    res = find_critical(POLY, B, STRAIGHT, tol_m=0.002, **COARSE)
    assert res.width <= 0.002
    assert res.m_lo < 1.0 + res.width  # frontier stays near the threshold


def test_result_midpoint_and_width():
    res = CriticalResult(m_lo=0.9, m_hi=1.1, tol=0.01, eps_accept=1e-3)
    assert res.m_hat == pytest.approx(1.0)
    assert res.width == pytest.approx(0.2)


def test_sample_records_continuation_detail():
    B = BernoulliProfile.constant(1.5)
    s = evaluate_mass_flux(POLY, B, STRAIGHT, 0.5, 1e-3, **COARSE)
    assert s.accepted
    assert "L=" in s.detail and "farfield_dev=" in s.detail
