"""Critical mass flux: the choking threshold of a nozzle.

For fixed gas and Bernoulli data, steady uniformly subsonic flows exist
for small mass fluxes and cease to exist past a critical value.  A flux
is accepted here when the far-field states are solvable, the iteration
converges, the truncation stays inactive, and the subsonic margin sits
below -eps_accept.  The threshold is located by geometric expansion of
the accepted flux followed by bisection on the accept/reject frontier,
returning a bracket rather than a point estimate.

The probes run with a much smaller truncation width than the plain
solver default.  The width controls where the density cap starts to
deform the problem, and any probe inside that deformed zone must be
rejected; a wide cap would therefore pull the accept/reject frontier
well below the true threshold.  With eps0_scale = 1e-4 the frontier sits
within about eps_accept / (2 m) of the vanishing-margin flux, far inside
the bracket tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import gas as G
from .elliptic import continuation_solve
from .farfield import BernoulliProfile, FarFieldError, solve_farfield
from .geometry import NozzleGeometry

__all__ = [
    "CriticalSearchError",
    "MarginSample",
    "CriticalResult",
    "evaluate_mass_flux",
    "margin_curve",
    "find_critical",
]


class CriticalSearchError(RuntimeError):
    """Raised when no accepted mass flux can be found."""


@dataclass
class MarginSample:
    """Outcome of probing one mass flux."""

    m: float
    accepted: bool
    reason: str  # "ok", "farfield", "not_converged", "truncated", "margin", "bounds"
    margin: Optional[float] = None
    converged: Optional[bool] = None
    truncation_active: Optional[bool] = None
    detail: str = ""


@dataclass
class CriticalResult:
    """Bracket [m_lo, m_hi]: largest accepted and smallest rejected flux."""

    m_lo: float
    m_hi: float
    tol: float
    eps_accept: float
    samples: list = field(default_factory=list)

    @property
    def m_hat(self) -> float:
        """Point estimate: the bracket midpoint."""
        return 0.5 * (self.m_lo + self.m_hi)

    @property
    def width(self) -> float:
        return self.m_hi - self.m_lo


def evaluate_mass_flux(
    gas: G.GasLaw,
    B: BernoulliProfile,
    nozzle: NozzleGeometry,
    m: float,
    eps_accept: float,
    n_xi: int = 401,
    n_eta: int = 41,
    L0: float = 8.0,
    L_max: float = 32.0,
    bc_mode: str = "linear",
    eps0_scale: float = 1e-4,
    damping: float = 0.7,
    tol_nonlinear: float = 1e-10,
    tol_farfield: float = 1e-6,
    max_iter: int = 200,
) -> MarginSample:
    """Probe one mass flux: far-field solvability plus a section solve.

    The far-field states are required strictly (no sonic fallback), so a
    flux beyond the upstream range is rejected outright.  Feasible fluxes
    run the full domain-continuation solve so curved nozzles are judged
    on a section long enough for the ends to settle.
    """
    try:
        ff = solve_farfield(gas, B, m, a=nozzle.a, b=nozzle.b)
    except FarFieldError as e:
        return MarginSample(m=m, accepted=False, reason="farfield", detail=str(e))
    cont = continuation_solve(
        gas,
        ff,
        nozzle,
        m,
        n_xi=n_xi,
        n_eta=n_eta,
        L0=L0,
        L_max=L_max,
        bc_mode=bc_mode,
        eps0_scale=eps0_scale,
        damping=damping,
        tol_nonlinear=tol_nonlinear,
        tol_farfield=tol_farfield,
        max_iter=max_iter,
    )
    res = cont.result
    sample = MarginSample(
        m=m,
        accepted=False,
        reason="ok",
        margin=res.subsonic_margin,
        converged=res.converged,
        truncation_active=res.truncation_active,
        detail=f"L={cont.L:g} farfield_dev={max(cont.farfield_dev):.3e}",
    )
    if not res.converged:
        sample.reason = "not_converged"
    elif res.truncation_active:
        sample.reason = "truncated"
    elif not (
        float(np.min(res.psi)) >= -1e-8 * m
        and float(np.max(res.psi)) <= m * (1.0 + 1e-8)
    ):
        sample.reason = "bounds"
    elif not res.subsonic_margin < -eps_accept:
        sample.reason = "margin"
    else:
        sample.accepted = True
    return sample


def margin_curve(
    gas: G.GasLaw,
    B: BernoulliProfile,
    nozzle: NozzleGeometry,
    m_values,
    eps_accept_scale: float = 1e-3,
    **solver_kw,
) -> list:
    """Probe a sequence of mass fluxes independently (cold starts)."""
    sig = G.critical_flux(gas, B.b_min)
    eps_accept = eps_accept_scale * sig**2
    return [
        evaluate_mass_flux(gas, B, nozzle, float(m), eps_accept, **solver_kw)
        for m in np.asarray(m_values, dtype=float)
    ]


def find_critical(
    gas: G.GasLaw,
    B: BernoulliProfile,
    nozzle: NozzleGeometry,
    m_start: Optional[float] = None,
    factor: float = 1.25,
    tol_m: Optional[float] = None,
    eps_accept_scale: float = 1e-3,
    max_expand: int = 40,
    **solver_kw,
) -> CriticalResult:
    """Bracket the critical mass flux by expansion and bisection.

    Starting from an accepted flux (found by shrinking m_start if needed),
    the flux grows by the given factor until a probe is rejected; the
    accept/reject frontier is then bisected until the bracket width drops
    below tol_m.  Defaults scale with the smallest critical momentum of
    the data: m_start is half of it and tol_m one percent.
    """
    sig = float(G.critical_flux(gas, B.b_min))
    eps_accept = eps_accept_scale * sig**2
    if m_start is None:
        m_start = 0.5 * sig
    if tol_m is None:
        tol_m = 0.01 * sig
    samples = []

    def probe(m):
        s = evaluate_mass_flux(gas, B, nozzle, m, eps_accept, **solver_kw)
        samples.append(s)
        return s

    m = float(m_start)
    s = probe(m)
    shrink = 0
    while not s.accepted:
        shrink += 1
        if shrink > max_expand:
            raise CriticalSearchError(
                f"no accepted mass flux found at or below {m_start:g}; "
                f"last rejection: {s.reason}"
            )
        m /= factor
        s = probe(m)
    lo = m
    hi = None
    for _ in range(max_expand):
        m *= factor
        s = probe(m)
        if s.accepted:
            lo = m
        else:
            hi = m
            break
    if hi is None:
        raise CriticalSearchError(
            f"no rejected mass flux found below {m:g}; data may admit "
            "arbitrarily large fluxes only through a modelling error"
        )
    while hi - lo > tol_m:
        mid = 0.5 * (lo + hi)
        if probe(mid).accepted:
            lo = mid
        else:
            hi = mid
    return CriticalResult(
        m_lo=lo, m_hi=hi, tol=float(tol_m), eps_accept=eps_accept, samples=samples
    )
