"""Isentropic gas algebra for steady compressible flow.

Two gas families are supported:

* polytropic:  p(rho) = A * rho**gamma  (gamma > 1), enthalpy
  h(rho) = A*gamma/(gamma-1) * rho**(gamma-1), normalized h(0) = 0.
* isothermal:  p(rho) = c**2 * rho, enthalpy h(rho) = c**2 * ln(rho),
  normalized h(1) = 0 and unbounded below as rho -> 0.

For a Bernoulli constant s the key states are

* rho_max(s): maximum (stagnation) density, h(rho_max) = s,
* rho_crit(s): critical density, h(rho_crit) + c^2(rho_crit)/2 = s,
* speed Gamma(s) = c(rho_crit): critical speed,
* flux Sigma(s) = rho_crit * sqrt(2*(s - h(rho_crit))): critical mass flux.

The momentum function I(rho) = 2*rho**2*(s - h(rho)) equals (rho*q)**2 on
states with speed q; it increases on (0, rho_crit) and decreases on
(rho_crit, rho_max) with maximum Sigma(s)**2.  The subsonic branch inverse
J(M, s) returns the larger root of I(rho) = M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "GasLaw",
    "GasDomainError",
    "SupersonicStateError",
    "CriticalState",
    "pressure",
    "enthalpy",
    "enthalpy_inverse",
    "sound_speed_sq",
    "pressure_second_deriv",
    "stagnation_density",
    "sonic_density",
    "critical_flux",
    "critical_flux_deriv",
    "critical_state",
    "momentum_sq",
    "subsonic_density",
]


class GasDomainError(ValueError):
    """Raised when a state lies outside the admissible thermodynamic range."""


class SupersonicStateError(GasDomainError):
    """Raised when a requested momentum exceeds the critical mass flux."""


@dataclass(frozen=True)
class GasLaw:
    """Pressure law p(rho), either polytropic or isothermal.

    Attributes
    ----------
    kind : str
        "polytropic" or "isothermal".
    A, gamma : float
        Polytropic coefficients, p = A*rho**gamma.  Unused for isothermal.
    c : float
        Isothermal sound speed, p = c**2*rho.  Unused for polytropic.
    """

    kind: str
    A: float = 1.0
    gamma: float = 2.0
    c: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("polytropic", "isothermal"):
            raise GasDomainError(f"unknown gas kind {self.kind!r}")
        if self.kind == "polytropic":
            if not (self.A > 0.0):
                raise GasDomainError("polytropic coefficient A must be positive")
            if not (self.gamma > 1.0):
                raise GasDomainError("polytropic exponent gamma must exceed 1")
        else:
            if not (self.c > 0.0):
                raise GasDomainError("isothermal sound speed c must be positive")

    @staticmethod
    def polytropic(A: float, gamma: float) -> "GasLaw":
        return GasLaw(kind="polytropic", A=float(A), gamma=float(gamma))

    @staticmethod
    def isothermal(c: float) -> "GasLaw":
        return GasLaw(kind="isothermal", c=float(c))

    @property
    def b0(self) -> float:
        """Infimum of the enthalpy: 0 for polytropic, -inf for isothermal."""
        return 0.0 if self.kind == "polytropic" else -math.inf


class CriticalState(NamedTuple):
    """States at Bernoulli constant s: (rho_max, rho_crit, speed, flux)."""

    rho_max: float
    rho_crit: float
    speed: float
    flux: float


def _prep(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def pressure(gas: GasLaw, rho):
    """Pressure p(rho)."""
    r, scalar = _prep(rho)
    if np.any(r < 0.0):
        raise GasDomainError("density must be nonnegative")
    if gas.kind == "polytropic":
        p = gas.A * r**gas.gamma
    else:
        p = gas.c**2 * r
    return _out(p, scalar)


def enthalpy(gas: GasLaw, rho):
    """Specific enthalpy h(rho) = int_.^rho p'(t)/t dt.

    Polytropic: h = A*gamma/(gamma-1)*rho**(gamma-1) with h(0) = 0.
    Isothermal: h = c**2*ln(rho) with h(1) = 0; requires rho > 0.
    """
    r, scalar = _prep(rho)
    if gas.kind == "polytropic":
        if np.any(r < 0.0):
            raise GasDomainError("density must be nonnegative")
        h = gas.A * gas.gamma / (gas.gamma - 1.0) * r ** (gas.gamma - 1.0)
    else:
        if np.any(r <= 0.0):
            raise GasDomainError("isothermal enthalpy requires positive density")
        h = gas.c**2 * np.log(r)
    return _out(h, scalar)


def enthalpy_inverse(gas: GasLaw, hval):
    """Density with the given enthalpy (h is strictly increasing)."""
    h, scalar = _prep(hval)
    if gas.kind == "polytropic":
        if np.any(h < 0.0):
            raise GasDomainError("polytropic enthalpy is nonnegative")
        k = gas.A * gas.gamma / (gas.gamma - 1.0)
        r = (h / k) ** (1.0 / (gas.gamma - 1.0))
    else:
        r = np.exp(h / gas.c**2)
    return _out(r, scalar)


def sound_speed_sq(gas: GasLaw, rho):
    """Squared sound speed c^2(rho) = p'(rho)."""
    r, scalar = _prep(rho)
    if np.any(r < 0.0):
        raise GasDomainError("density must be nonnegative")
    if gas.kind == "polytropic":
        c2 = gas.A * gas.gamma * r ** (gas.gamma - 1.0)
    else:
        c2 = np.full_like(r, gas.c**2)
    return _out(c2, scalar)


def pressure_second_deriv(gas: GasLaw, rho):
    """p''(rho); zero for the isothermal law."""
    r, scalar = _prep(rho)
    if gas.kind == "polytropic":
        p2 = gas.A * gas.gamma * (gas.gamma - 1.0) * r ** (gas.gamma - 2.0)
    else:
        p2 = np.zeros_like(r)
    return _out(p2, scalar)


def _check_s(gas: GasLaw, s: np.ndarray) -> None:
    if gas.kind == "polytropic" and np.any(s < 0.0):
        raise GasDomainError("Bernoulli constant below vacuum enthalpy h(0)=0")
    if not np.all(np.isfinite(s)):
        raise GasDomainError("Bernoulli constant must be finite")


def stagnation_density(gas: GasLaw, s):
    """Maximum density rho_max(s), the root of h(rho) = s."""
    sv, scalar = _prep(s)
    _check_s(gas, sv)
    if gas.kind == "polytropic":
        k = gas.A * gas.gamma / (gas.gamma - 1.0)
        r = (sv / k) ** (1.0 / (gas.gamma - 1.0))
    else:
        r = np.exp(sv / gas.c**2)
    return _out(r, scalar)


def sonic_density(gas: GasLaw, s):
    """Critical density rho_crit(s), the root of h(rho) + c^2(rho)/2 = s."""
    sv, scalar = _prep(s)
    _check_s(gas, sv)
    if gas.kind == "polytropic":
        k = gas.A * gas.gamma * (gas.gamma + 1.0) / (2.0 * (gas.gamma - 1.0))
        r = (sv / k) ** (1.0 / (gas.gamma - 1.0))
    else:
        r = np.exp(sv / gas.c**2 - 0.5)
    return _out(r, scalar)


def critical_flux(gas: GasLaw, s):
    """Critical mass flux Sigma(s) = rho_crit*sqrt(2*(s - h(rho_crit)))."""
    sv, scalar = _prep(s)
    rc = np.asarray(sonic_density(gas, sv))
    q2 = np.maximum(2.0 * (sv - np.asarray(enthalpy(gas, rc))), 0.0)
    return _out(rc * np.sqrt(q2), scalar)


def critical_flux_deriv(gas: GasLaw, s):
    """Closed-form derivative dSigma/ds.

    With rho = rho_crit(s),

        Sigma'(s) = sqrt(2*(s-h(rho))) / (p'(rho)/rho + p''(rho)/2)
                    + rho*(1 - 2*p'(rho)/(2*p'(rho)+rho*p''(rho)))
                      / sqrt(2*(s-h(rho))).
    """
    sv, scalar = _prep(s)
    rc = np.asarray(sonic_density(gas, sv))
    pp = np.asarray(sound_speed_sq(gas, rc))
    p2 = np.asarray(pressure_second_deriv(gas, rc))
    q = np.sqrt(np.maximum(2.0 * (sv - np.asarray(enthalpy(gas, rc))), 0.0))
    out = q / (pp / rc + 0.5 * p2) + rc * (1.0 - 2.0 * pp / (2.0 * pp + rc * p2)) / q
    return _out(out, scalar)


def critical_state(gas: GasLaw, s: float) -> CriticalState:
    """Bundle (rho_max, rho_crit, Gamma, Sigma) at Bernoulli constant s."""
    rb = stagnation_density(gas, s)
    rc = sonic_density(gas, s)
    speed = math.sqrt(sound_speed_sq(gas, rc))
    return CriticalState(rb, rc, speed, critical_flux(gas, s))


def momentum_sq(gas: GasLaw, rho, s):
    """Momentum function I(rho) = 2*rho**2*(s - h(rho)) = (rho*q)**2.

    Defined for 0 < rho <= rho_max(s); increases up to rho_crit(s) where
    it attains Sigma(s)**2, then decreases to zero at rho_max(s).
    """
    r, rs = _prep(rho)
    sv, ss = _prep(s)
    _check_s(gas, sv)
    rb = np.asarray(stagnation_density(gas, sv))
    if np.any(r <= 0.0):
        raise GasDomainError("momentum function requires positive density")
    if np.any(r > rb * (1.0 + 1e-12)):
        raise GasDomainError("density exceeds the maximum density for this s")
    val = 2.0 * r**2 * np.maximum(sv - np.asarray(enthalpy(gas, r)), 0.0)
    return _out(val, rs and ss)


def _momentum_and_deriv(gas: GasLaw, rho, s):
    h = np.asarray(enthalpy(gas, rho))
    c2 = np.asarray(sound_speed_sq(gas, rho))
    qsq = 2.0 * (s - h)
    return 2.0 * rho**2 * (s - h), 2.0 * rho * (qsq - c2)


def subsonic_density(gas: GasLaw, Msq, s):
    """Subsonic branch J(M, s): larger root of I(rho) = M.

    J(0, s) = rho_max(s) and J(Sigma(s)**2, s) = rho_crit(s); the sonic
    endpoint is returned by continuous extension rather than as an error.
    Raises SupersonicStateError when M exceeds Sigma(s)**2 beyond roundoff.

    Solved by a bracketed Newton iteration on [rho_crit, rho_max], where
    I is strictly decreasing; converges to residual <= 1e-13 relative.
    """
    msq, m_scalar = _prep(Msq)
    sv, s_scalar = _prep(s)
    _check_s(gas, sv)
    msq, sv = np.broadcast_arrays(msq, sv)
    msq = msq.astype(float).copy()
    sv = sv.astype(float)
    if np.any(msq < 0.0):
        raise GasDomainError("momentum must be nonnegative")

    rb = np.asarray(stagnation_density(gas, sv), dtype=float)
    rc = np.asarray(sonic_density(gas, sv), dtype=float)
    sig_sq = np.asarray(critical_flux(gas, sv), dtype=float) ** 2
    if np.any(msq > sig_sq * (1.0 + 1e-12)):
        worst = float(np.max(msq - sig_sq))
        raise SupersonicStateError(
            f"momentum exceeds critical flux squared by up to {worst:.3e}"
        )
    msq = np.minimum(msq, sig_sq)

    lo = rc.copy()
    hi = rb.copy()
    x = 0.5 * (lo + hi)
    # stop at the machine floor: residual within roundoff of evaluating I,
    # or a Newton step below one ulp of the bracket scale
    tol_f = 4e-16 * np.maximum(sig_sq, 1e-300)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(100):
        f, fp = _momentum_and_deriv(gas, x, sv)
        f = f - msq
        done = done | (np.abs(f) <= tol_f)
        if bool(np.all(done)):
            break
        # I decreases on the bracket: f > 0 means x is left of the root
        lo = np.where(~done & (f > 0.0), x, lo)
        hi = np.where(~done & (f <= 0.0), x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / fp
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi) | (fp >= 0.0)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        tiny_step = np.abs(xn - x) <= 4e-16 * rb
        x = np.where(done, x, xn)
        done = done | tiny_step

    # exact endpoints, closed form
    x = np.where(msq <= 0.0, rb, x)
    x = np.where(msq >= sig_sq, rc, x)
    return _out(x, m_scalar and s_scalar)
