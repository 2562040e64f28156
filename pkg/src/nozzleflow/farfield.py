"""Asymptotic far-field states and stream-coordinate profiles.

Upstream the nozzle walls flatten to the unit strip and the flow tends to a
shear profile (rho0, u0(x2), 0) determined by a Bernoulli profile B(x2):

    u0(x2) = sqrt(2*(B(x2) - h(rho0))),
    m = int_0^1 rho0*u0(x2) dx2.

Downstream the walls flatten to the strip a < y < b and the flow tends to
(rho1, u1(y), 0), where rho1 solves the height relation

    int_0^1 rho0*u0(s) / (rho1*sqrt(2*(B(s) - h(rho1)))) ds = b - a

and the flow map y(s) pairs upstream height s with downstream height y by
conservation of mass flux between streamlines.

The stream coordinate kappa inverts psi(X2) = int_0^X2 rho0*u0, giving the
streamline profiles F(psi) = u0(kappa(psi)) and F'(psi); their
compactly-supported Lipschitz extension (Fext, Fext_prime) feeds the
elliptic solver, which may evaluate them outside [0, m] during iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from . import gas as G

__all__ = [
    "BernoulliProfile",
    "FarFieldError",
    "UpstreamState",
    "DownstreamState",
    "StreamProfiles",
    "FarFieldStates",
    "AdmissibilityReport",
    "solve_upstream",
    "solve_downstream",
    "build_stream_profiles",
    "extend_profiles",
    "check_assumptions",
    "solve_farfield",
]

_SCAN_N = 20001


class FarFieldError(ValueError):
    """Raised when no admissible far-field state exists for the data."""


class BernoulliProfile:
    """Bernoulli function B(x2) on the upstream strip height [0, 1].

    Wraps a constant, a polynomial in x2, or a tabulated profile, and
    carries the scan-derived scalars used by the admissibility checks:
    b_min, b_max and delta = max(sup|B'|, Lip(B')).
    """

    def __init__(self, fn: Callable, dfn: Callable, kind: str):
        self._fn = fn
        self._dfn = dfn
        self.kind = kind
        x = np.linspace(0.0, 1.0, _SCAN_N)
        vals = np.asarray(fn(x), dtype=float)
        dvals = np.asarray(dfn(x), dtype=float)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(dvals))):
            raise FarFieldError("Bernoulli profile must be finite on [0, 1]")
        self.b_min = float(np.min(vals))
        self.b_max = float(np.max(vals))
        lip = float(np.max(np.abs(np.diff(dvals) / np.diff(x))))
        self.delta = max(float(np.max(np.abs(dvals))), lip)

    def __call__(self, x):
        out = np.asarray(self._fn(np.asarray(x, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def deriv(self, x):
        out = np.asarray(self._dfn(np.asarray(x, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def constant(value: float) -> "BernoulliProfile":
        v = float(value)
        return BernoulliProfile(
            lambda x: np.full_like(np.asarray(x, dtype=float), v),
            lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            "constant",
        )

    @staticmethod
    def from_coeffs(coeffs: Sequence[float]) -> "BernoulliProfile":
        """Polynomial B(x2) = sum_k coeffs[k] * x2**k."""
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise FarFieldError("polynomial Bernoulli profile needs 1-D coefficients")
        dc = np.polynomial.polynomial.polyder(c)
        return BernoulliProfile(
            lambda x: np.polynomial.polynomial.polyval(x, c),
            lambda x: np.polynomial.polynomial.polyval(x, dc),
            "polynomial",
        )

    @staticmethod
    def from_table(x: Sequence[float], values: Sequence[float]) -> "BernoulliProfile":
        xa = np.asarray(x, dtype=float)
        va = np.asarray(values, dtype=float)
        if xa.ndim != 1 or xa.shape != va.shape or xa.size < 2:
            raise FarFieldError("tabulated Bernoulli profile needs matching 1-D columns")
        if not (np.all(np.diff(xa) > 0) and xa[0] <= 0.0 and xa[-1] >= 1.0):
            raise FarFieldError("tabulated Bernoulli abscissae must increase and cover [0, 1]")
        p = PchipInterpolator(xa, va)
        return BernoulliProfile(p, p.derivative(), "table")


@dataclass
class UpstreamState:
    rho0: float
    u0: Callable
    u0_prime: Callable
    choked: bool = False


@dataclass
class DownstreamState:
    rho1: float
    u1: Callable
    ymap: Callable
    warnings: list = field(default_factory=list)


@dataclass
class StreamProfiles:
    kappa: Callable
    F: Callable
    Fprime: Callable
    psi_upstream: Callable


def _subsonic_window(gas: G.GasLaw, B: BernoulliProfile) -> tuple[float, float]:
    if gas.kind == "polytropic" and B.b_min <= 0.0:
        raise FarFieldError("Bernoulli profile must stay above the vacuum enthalpy")
    lo = G.sonic_density(gas, B.b_max)
    hi = G.stagnation_density(gas, B.b_min)
    if not lo < hi:
        raise FarFieldError(
            "empty subsonic window: Bernoulli profile varies too strongly "
            f"(rho_crit(b_max)={lo:.6g} >= rho_max(b_min)={hi:.6g})"
        )
    return lo, hi


def _upstream_flux(gas: G.GasLaw, B: BernoulliProfile, rho0: float, x: np.ndarray):
    q2 = np.maximum(2.0 * (B(x) - G.enthalpy(gas, rho0)), 0.0)
    return rho0 * np.sqrt(q2)


def solve_upstream(
    gas: G.GasLaw, B: BernoulliProfile, m: float, allow_choked: bool = False
) -> UpstreamState:
    """Upstream density rho0 with mass flux m, and the shear profile u0.

    The flux integral int_0^1 rho0*sqrt(2*(B - h(rho0))) dx2 decreases in
    rho0 on the subsonic window (rho_crit(b_max), rho_max(b_min)); the root
    is found by bracketed Newton to 1e-12 relative.  With allow_choked=True
    an overlarge m yields the sonic-endpoint state flagged choked instead
    of an error (used to probe the truncated problem past choking).
    """
    if not (m > 0.0):
        raise FarFieldError("mass flux m must be positive")
    lo, hi = _subsonic_window(gas, B)
    x = np.linspace(0.0, 1.0, 2049)

    def resid(r: float) -> float:
        return float(simpson(_upstream_flux(gas, B, r, x), x=x)) - m

    r_lo = resid(lo)
    if r_lo < 0.0:
        if allow_choked:
            state = _upstream_state(gas, B, lo, choked=True)
            return state
        raise FarFieldError(
            f"mass flux m={m:.6g} exceeds the subsonic range "
            f"(maximum admissible flux {r_lo + m:.6g})"
        )
    r_hi = resid(hi * (1.0 - 1e-14))
    if r_hi > 0.0:
        raise FarFieldError(
            f"mass flux m={m:.6g} lies below the admissible window "
            f"(minimum admissible flux {r_hi + m:.6g})"
        )

    a_, b_ = lo, hi
    rho = 0.5 * (a_ + b_)
    for _ in range(200):
        f = resid(rho)
        if f > 0.0:
            a_ = rho
        else:
            b_ = rho
        # Newton step from the analytic derivative, bisection fallback
        q2 = np.maximum(2.0 * (B(x) - G.enthalpy(gas, rho)), 1e-300)
        dflux = np.sqrt(q2) - G.sound_speed_sq(gas, rho) / np.sqrt(q2)
        fp = float(simpson(dflux, x=x))
        step = f / fp if fp < 0.0 else np.nan
        cand = rho - step if np.isfinite(step) else 0.5 * (a_ + b_)
        if not (a_ < cand < b_):
            cand = 0.5 * (a_ + b_)
        if abs(cand - rho) <= 1e-13 * hi and abs(f) <= 1e-12 * max(m, 1.0):
            rho = cand
            break
        rho = cand
    return _upstream_state(gas, B, rho, choked=False)


def _upstream_state(gas: G.GasLaw, B: BernoulliProfile, rho0: float, choked: bool):
    h0 = G.enthalpy(gas, rho0)

    def u0(x2):
        return np.sqrt(np.maximum(2.0 * (B(x2) - h0), 0.0))

    def u0_prime(x2):
        return B.deriv(x2) / np.maximum(u0(x2), 1e-300)

    return UpstreamState(rho0=float(rho0), u0=u0, u0_prime=u0_prime, choked=choked)


def solve_downstream(
    gas: G.GasLaw,
    B: BernoulliProfile,
    upstream: UpstreamState,
    m: float,
    a: float,
    b: float,
) -> DownstreamState:
    """Downstream density rho1 on the strip a < y < b, speed u1, flow map.

    rho1 is the root of the height relation; the relation increases in rho1
    on the subsonic window, so plain bisection to 1e-12 is used.  The flow
    map integrates dy/ds = rho0*u0(s)/(rho1*u1(y(s))) with classical RK4,
    u1 along the way supplied by Bernoulli conservation; afterwards
    |ymap(1) - b| <= 1e-8 is enforced (warning up to 1e-6, error beyond).
    """
    if not (b > a):
        raise FarFieldError("downstream strip needs b > a")
    lo, hi = _subsonic_window(gas, B)
    s = np.linspace(0.0, 1.0, 2049)
    flux = np.asarray(upstream.u0(s), dtype=float) * upstream.rho0

    def height(r1: float) -> float:
        q2 = np.maximum(2.0 * (B(s) - G.enthalpy(gas, r1)), 1e-300)
        return float(simpson(flux / (r1 * np.sqrt(q2)), x=s)) - (b - a)

    d_lo = height(lo * (1.0 + 1e-14))
    if d_lo > 0.0:
        raise FarFieldError(
            f"no subsonic downstream state: strip width {b - a:.6g} is too "
            "narrow for this mass flux (section chokes)"
        )
    d_hi = height(hi * (1.0 - 1e-14))
    if d_hi < 0.0:
        raise FarFieldError(
            f"no subsonic downstream state: strip width {b - a:.6g} is too "
            "wide for this mass flux"
        )
    a_, b_ = lo * (1.0 + 1e-14), hi * (1.0 - 1e-14)
    for _ in range(200):
        mid = 0.5 * (a_ + b_)
        if height(mid) > 0.0:
            b_ = mid
        else:
            a_ = mid
        if b_ - a_ <= 1e-13 * hi:
            break
    rho1 = 0.5 * (a_ + b_)

    h1 = G.enthalpy(gas, rho1)

    def u1_of_s(t):
        return np.sqrt(np.maximum(2.0 * (B(t) - h1), 1e-300))

    def slope(t):
        return upstream.rho0 * np.asarray(upstream.u0(t)) / (rho1 * u1_of_s(t))

    n_step = 4096
    sg = np.linspace(0.0, 1.0, n_step + 1)
    hstep = 1.0 / n_step
    y = np.empty(n_step + 1)
    y[0] = a
    mid_slope = slope(sg[:-1] + 0.5 * hstep)
    end_slope = slope(sg)
    for k in range(n_step):
        k1 = end_slope[k]
        k23 = mid_slope[k]
        k4 = end_slope[k + 1]
        y[k + 1] = y[k] + hstep * (k1 + 4.0 * k23 + k4) / 6.0

    dev = abs(y[-1] - b)
    warnings = []
    if dev > 1e-6:
        raise FarFieldError(
            f"flow map failed to land on the downstream wall: |y(1)-b|={dev:.3e}"
        )
    if dev > 1e-8:
        warnings.append(f"flow map end deviation {dev:.3e} exceeds 1e-8")

    ymap_p = PchipInterpolator(sg, y)
    u1_p = PchipInterpolator(y, u1_of_s(sg))

    def ymap(t):
        out = ymap_p(np.clip(t, 0.0, 1.0))
        return float(out) if np.ndim(t) == 0 else out

    def u1(yy):
        out = u1_p(np.clip(yy, a, b))
        return float(out) if np.ndim(yy) == 0 else out

    return DownstreamState(rho1=float(rho1), u1=u1, ymap=ymap, warnings=warnings)


_N_DENSE = 131072  # power of two: thinning keeps exact node values
_N_TABLE = 8193


def build_stream_profiles(
    gas: G.GasLaw, upstream: UpstreamState, m: float
) -> StreamProfiles:
    """Stream coordinate kappa and streamline profiles F, F' on [0, m].

    psi(X2) = int_0^X2 rho0*u0 is tabulated by cumulative trapezoid on a
    dense grid, inverted onto a uniform psi-grid of 4097+ points, and both
    kappa and the profiles are stored as monotone cubic interpolants:

        F(psi) = u0(kappa(psi)),
        F'(psi) = u0'(kappa(psi)) / (rho0*u0(kappa(psi))).
    """
    rho0 = upstream.rho0
    xd = np.linspace(0.0, 1.0, _N_DENSE + 1)
    fluxd = rho0 * np.asarray(upstream.u0(xd), dtype=float)
    # extended-precision accumulation: plain float64 cumsum drifts ~1e-12
    # over 1e5 terms, visible next to the interpolation error
    increments = (0.5 * (fluxd[1:] + fluxd[:-1]) * np.diff(xd)).astype(np.longdouble)
    psid = np.concatenate(([0.0], np.cumsum(increments).astype(float)))
    m_quad = psid[-1]
    if abs(m_quad - m) > 1e-8 * max(m, 1.0):
        raise FarFieldError(
            f"upstream profile integrates to {m_quad:.12g}, not the requested m={m:.12g}"
        )
    psid *= m / m_quad  # pin the endpoint exactly

    step = _N_DENSE // (_N_TABLE - 1)
    x_t = xd[::step]
    psi_t = psid[::step]
    psi_up_p = PchipInterpolator(x_t, psi_t)

    # invert onto the uniform psi grid; polish by Newton on the interpolant
    psi_u = np.linspace(0.0, m, _N_TABLE)
    x_at = np.interp(psi_u, psid, xd)
    for _ in range(3):
        resid = psi_up_p(x_at) - psi_u
        x_at = np.clip(x_at - resid / np.maximum(rho0 * upstream.u0(x_at), 1e-300), 0.0, 1.0)
    x_at[0], x_at[-1] = 0.0, 1.0

    u0_at = np.asarray(upstream.u0(x_at), dtype=float)
    fp_at = np.asarray(upstream.u0_prime(x_at), dtype=float) / np.maximum(
        rho0 * u0_at, 1e-300
    )
    kappa_p = PchipInterpolator(psi_u, x_at)
    F_p = PchipInterpolator(psi_u, u0_at)
    Fp_p = PchipInterpolator(psi_u, fp_at)

    def _wrap(p, lo, hi):
        def f(v):
            out = p(np.clip(v, lo, hi))
            return float(out) if np.ndim(v) == 0 else out

        return f

    return StreamProfiles(
        kappa=_wrap(kappa_p, 0.0, m),
        F=_wrap(F_p, 0.0, m),
        Fprime=_wrap(Fp_p, 0.0, m),
        psi_upstream=_wrap(psi_up_p, 0.0, 1.0),
    )


def extend_profiles(profiles: StreamProfiles, m: float):
    """Lipschitz extension (Fext, Fext_prime) with compact support.

    The extended derivative g equals F' on [0, m], decays linearly to zero
    over [m, 2m] and [-m, 0], and vanishes outside [-m, 2m]:

        g(s) = F'(m)*(2m - s)/m   on [m, 2m],
        g(s) = F'(0)*(s + m)/m    on [-m, 0].

    Fext(s) = F(0) + int_0^s g, constant outside [-m, 2m].
    """
    F0 = profiles.F(0.0)
    Fm = profiles.F(m)
    g0 = profiles.Fprime(0.0)
    gm = profiles.Fprime(m)

    def fext_prime(s):
        sv = np.asarray(s, dtype=float)
        out = np.zeros_like(sv)
        inside = (sv >= 0.0) & (sv <= m)
        if np.any(inside):
            out[inside] = profiles.Fprime(sv[inside])
        upper = (sv > m) & (sv < 2.0 * m)
        out[upper] = gm * (2.0 * m - sv[upper]) / m
        lower = (sv < 0.0) & (sv > -m)
        out[lower] = g0 * (sv[lower] + m) / m
        return float(out) if np.ndim(s) == 0 else out

    def fext(s):
        sv = np.asarray(s, dtype=float)
        out = np.asarray(profiles.F(np.clip(sv, 0.0, m)), dtype=float).copy()
        upper = sv > m
        if np.any(upper):
            sig = np.minimum(sv[upper], 2.0 * m)
            out[upper] = Fm + gm * (2.0 * m * sig - 0.5 * sig**2 - 1.5 * m**2) / m
        lower = sv < 0.0
        if np.any(lower):
            sig = np.maximum(sv[lower], -m)
            out[lower] = F0 + g0 * (0.5 * sig**2 + m * sig) / m
        return float(out) if np.ndim(s) == 0 else out

    return fext, fext_prime


@dataclass
class AdmissibilityReport:
    """Advisory checks on the far-field data; never blocks a run."""

    delta: float
    m: float
    m_threshold: float
    b_min: float
    b_max: float
    inlet_slope_ok: bool
    outlet_slope_ok: bool
    m_above_threshold: bool
    upstream_solvable: bool
    downstream_solvable: bool
    messages: list

    @property
    def ok(self) -> bool:
        return (
            self.inlet_slope_ok
            and self.outlet_slope_ok
            and self.m_above_threshold
            and self.upstream_solvable
            and self.downstream_solvable
        )

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "m": self.m,
            "m_threshold": self.m_threshold,
            "b_min": self.b_min,
            "b_max": self.b_max,
            "inlet_slope_ok": self.inlet_slope_ok,
            "outlet_slope_ok": self.outlet_slope_ok,
            "m_above_threshold": self.m_above_threshold,
            "upstream_solvable": self.upstream_solvable,
            "downstream_solvable": self.downstream_solvable,
            "ok": self.ok,
            "messages": list(self.messages),
        }


def check_assumptions(
    gas: G.GasLaw, B: BernoulliProfile, m: float, a: float = 0.0, b: float = 1.0
) -> AdmissibilityReport:
    """Report delta = ||B'||_{C^0,1}, slope signs, m > delta**(1/4), and
    whether the upstream and downstream root brackets are nonempty."""
    messages = []
    threshold = B.delta ** 0.25
    inlet_ok = B.deriv(0.0) <= 1e-12
    outlet_ok = B.deriv(1.0) >= -1e-12
    m_ok = m > threshold
    if not inlet_ok:
        messages.append("B'(0) > 0: inlet slope condition violated")
    if not outlet_ok:
        messages.append("B'(1) < 0: outlet slope condition violated")
    if not m_ok:
        messages.append(
            f"m={m:.6g} not above delta**(1/4)={threshold:.6g}: smallness regime unverified"
        )
    upstream_ok = True
    downstream_ok = True
    up = None
    try:
        up = solve_upstream(gas, B, m)
    except (FarFieldError, G.GasDomainError) as exc:
        upstream_ok = False
        downstream_ok = False
        messages.append(f"upstream bracket empty: {exc}")
    if up is not None:
        try:
            solve_downstream(gas, B, up, m, a, b)
        except (FarFieldError, G.GasDomainError) as exc:
            downstream_ok = False
            messages.append(f"downstream bracket empty: {exc}")
    return AdmissibilityReport(
        delta=B.delta,
        m=m,
        m_threshold=threshold,
        b_min=B.b_min,
        b_max=B.b_max,
        inlet_slope_ok=bool(inlet_ok),
        outlet_slope_ok=bool(outlet_ok),
        m_above_threshold=bool(m_ok),
        upstream_solvable=upstream_ok,
        downstream_solvable=downstream_ok,
        messages=messages,
    )


@dataclass
class FarFieldStates:
    """Complete far-field description consumed by the elliptic solver."""

    gas: G.GasLaw
    B: BernoulliProfile
    m: float
    a: float
    b: float
    rho0: float
    rho1: float
    u0: Callable
    u0_prime: Callable
    u1: Callable
    ymap: Callable
    kappa: Callable
    F: Callable
    Fprime: Callable
    Fext: Callable
    Fext_prime: Callable
    psi_upstream: Callable
    psi_downstream: Callable
    h_rho0: float
    choked: bool = False
    warnings: list = field(default_factory=list)

    def bernoulli(self, psi):
        """Bernoulli value carried by the streamline psi (extended data)."""
        f = self.Fext(psi)
        return self.h_rho0 + 0.5 * np.asarray(f, dtype=float) ** 2

    def source_coeff(self, psi):
        """F~(psi) * F~'(psi), the streamline part of the vorticity source."""
        return np.asarray(self.Fext(psi)) * np.asarray(self.Fext_prime(psi))


def solve_farfield(
    gas: G.GasLaw,
    B: BernoulliProfile,
    m: float,
    a: float = 0.0,
    b: float = 1.0,
    allow_choked: bool = False,
) -> FarFieldStates:
    """Assemble the full far-field description for mass flux m.

    With allow_choked=True an overlarge m degrades to the sonic upstream
    state (flagged choked; downstream states reuse the upstream profile)
    so the truncated elliptic problem can still be probed.
    """
    up = solve_upstream(gas, B, m, allow_choked=allow_choked)
    warnings = []
    if up.choked:
        warnings.append(
            "requested mass flux exceeds the subsonic range: using the sonic "
            "upstream state; far-field profiles carry less flux than m"
        )
        m_eff = float(
            simpson(
                _upstream_flux(gas, B, up.rho0, np.linspace(0.0, 1.0, 2049)),
                x=np.linspace(0.0, 1.0, 2049),
            )
        )
        down = solve_downstream(gas, B, up, m_eff, a, b)
        profiles = build_stream_profiles(gas, up, m_eff)
        fext, fext_prime = extend_profiles(profiles, m_eff)
    else:
        down = solve_downstream(gas, B, up, m, a, b)
        profiles = build_stream_profiles(gas, up, m)
        fext, fext_prime = extend_profiles(profiles, m)
    warnings.extend(down.warnings)

    # downstream cumulative flux profile via the flow map: the flux between
    # the lower wall and height ymap(s) equals the upstream flux below s
    sg = np.linspace(0.0, 1.0, _N_TABLE)
    y_t = np.asarray(down.ymap(sg), dtype=float)
    psi_t = np.asarray(profiles.psi_upstream(sg), dtype=float)
    psi_down_p = PchipInterpolator(y_t, psi_t)

    def psi_downstream(y):
        out = psi_down_p(np.clip(y, a, b))
        return float(out) if np.ndim(y) == 0 else out

    return FarFieldStates(
        gas=gas,
        B=B,
        m=m,
        a=a,
        b=b,
        rho0=up.rho0,
        rho1=down.rho1,
        u0=up.u0,
        u0_prime=up.u0_prime,
        u1=down.u1,
        ymap=down.ymap,
        kappa=profiles.kappa,
        F=profiles.F,
        Fprime=profiles.Fprime,
        Fext=fext,
        Fext_prime=fext_prime,
        psi_upstream=profiles.psi_upstream,
        psi_downstream=psi_downstream,
        h_rho0=G.enthalpy(gas, up.rho0),
        choked=up.choked,
        warnings=warnings,
    )
