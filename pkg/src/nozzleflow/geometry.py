"""Nozzle geometry, finite sections, and wall-fitted structured meshes.

A nozzle is the region between two wall graphs f1(x1) < f2(x1) that
flatten to the unit strip (0, 1) upstream and to (a, b) downstream.  The
solver works on finite sections |x1| <= L meshed by the wall-fitted map

    x1 = xi,   x2 = (1 - eta)*f1(xi) + eta*f2(xi),

with (xi, eta) uniform on [-L, L] x [0, 1].  The convex-combination form
keeps wall nodes exactly on the walls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "GeometryError",
    "NozzleGeometry",
    "Domain",
    "Mesh",
    "BoundaryData",
    "build_nozzle",
    "truncate",
    "generate_mesh",
    "boundary_values",
]

_FAMILIES = ("straight", "tanh_transition", "bump", "tabulated")


class GeometryError(ValueError):
    """Raised for invalid wall definitions or degenerate meshes."""


@dataclass
class NozzleGeometry:
    """Two wall graphs with their derivatives and asymptotic heights."""

    family: str
    f1: Callable
    f2: Callable
    df1: Callable
    df2: Callable
    a: float
    b: float

    def width(self, x1):
        return np.asarray(self.f2(x1)) - np.asarray(self.f1(x1))


def _validate(noz: NozzleGeometry) -> NozzleGeometry:
    x = np.linspace(-1e3, 1e3, 10001)
    w = noz.width(x)
    if np.any(w <= 0.0):
        k = int(np.argmin(w))
        raise GeometryError(
            f"walls cross or touch near x1={x[k]:.6g} (width {w[k]:.3e})"
        )
    for xa, lo_t, hi_t, side in (
        (-1e3, 0.0, 1.0, "upstream"),
        (1e3, noz.a, noz.b, "downstream"),
    ):
        lo = float(np.asarray(noz.f1(xa)))
        hi = float(np.asarray(noz.f2(xa)))
        if abs(lo - lo_t) > 1e-8 or abs(hi - hi_t) > 1e-8:
            raise GeometryError(
                f"{side} walls do not flatten to ({lo_t:.6g}, {hi_t:.6g}): "
                f"found ({lo:.6g}, {hi:.6g}) at x1={xa:g}"
            )
    return noz


def _const(v: float) -> Callable:
    return lambda x: np.full_like(np.asarray(x, dtype=float), v)


def _zero() -> Callable:
    return lambda x: np.zeros_like(np.asarray(x, dtype=float))


def build_nozzle(family: str, **params) -> NozzleGeometry:
    """Construct a nozzle from one of the named wall families.

    straight: the unit strip, no parameters.
    tanh_transition(center, steepness, lower=(0, a), upper=(1, b)):
        each wall moves between its asymptotic heights along a tanh ramp.
    bump(amplitude, width, wall="lower"): Gaussian bump
        amplitude*exp(-(x1/width)**2) added to one wall of the unit strip.
    tabulated(lower, upper): two-column (x1, height) samples per wall,
        cubic-spline interpolated, held constant beyond the table.
    """
    if family == "straight":
        return _validate(
            NozzleGeometry("straight", _const(0.0), _const(1.0), _zero(), _zero(), 0.0, 1.0)
        )

    if family == "tanh_transition":
        center = float(params.get("center", 0.0))
        steep = float(params.get("steepness", 1.0))
        lo_up, lo_dn = (float(v) for v in params.get("lower", (0.0, 0.0)))
        hi_up, hi_dn = (float(v) for v in params.get("upper", (1.0, 1.0)))
        if abs(lo_up) > 1e-12 or abs(hi_up - 1.0) > 1e-12:
            raise GeometryError("tanh_transition upstream heights must be (0, 1)")
        if steep <= 0.0:
            raise GeometryError("tanh_transition steepness must be positive")

        def ramp(h_up, h_dn):
            mid, half = 0.5 * (h_up + h_dn), 0.5 * (h_dn - h_up)

            def f(x):
                return mid + half * np.tanh(steep * (np.asarray(x, dtype=float) - center))

            def df(x):
                # sech^2 written to avoid overflow or underflow far from the ramp
                z = np.abs(steep * (np.asarray(x, dtype=float) - center))
                e = np.exp(-2.0 * np.minimum(z, 300.0))
                return np.where(z >= 300.0, 0.0, half * steep * 4.0 * e / (1.0 + e) ** 2)

            return f, df

        f1, df1 = ramp(lo_up, lo_dn)
        f2, df2 = ramp(hi_up, hi_dn)
        return _validate(
            NozzleGeometry("tanh_transition", f1, f2, df1, df2, lo_dn, hi_dn)
        )

    if family == "bump":
        amp = float(params.get("amplitude", 0.0))
        width = float(params.get("width", 1.0))
        wall = params.get("wall", "lower")
        if width <= 0.0:
            raise GeometryError("bump width must be positive")
        if wall not in ("lower", "upper"):
            raise GeometryError("bump wall must be 'lower' or 'upper'")

        def g(x):
            xv = np.asarray(x, dtype=float)
            return amp * np.exp(-((xv / width) ** 2))

        def dg(x):
            xv = np.asarray(x, dtype=float)
            return amp * (-2.0 * xv / width**2) * np.exp(-((xv / width) ** 2))

        if wall == "lower":
            noz = NozzleGeometry("bump", g, _const(1.0), dg, _zero(), 0.0, 1.0)
        else:
            f2 = lambda x: 1.0 + g(x)
            noz = NozzleGeometry("bump", _const(0.0), f2, _zero(), dg, 0.0, 1.0)
        return _validate(noz)

    if family == "tabulated":
        walls = []
        for key, up_target in (("lower", 0.0), ("upper", 1.0)):
            tab = np.asarray(params[key], dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 4:
                raise GeometryError(
                    f"tabulated {key} wall needs an (n, 2) array of at least 4 samples"
                )
            xs, hs = tab[:, 0], tab[:, 1]
            if np.any(np.diff(xs) <= 0.0):
                raise GeometryError(f"tabulated {key} wall abscissae must increase")
            spl = CubicSpline(xs, hs, bc_type="clamped")
            dspl = spl.derivative()
            lo_x, hi_x = xs[0], xs[-1]
            lo_v, hi_v = hs[0], hs[-1]

            def f(x, spl=spl, lo_x=lo_x, hi_x=hi_x, lo_v=lo_v, hi_v=hi_v):
                xv = np.asarray(x, dtype=float)
                out = spl(np.clip(xv, lo_x, hi_x))
                return np.where(xv < lo_x, lo_v, np.where(xv > hi_x, hi_v, out))

            def df(x, dspl=dspl, lo_x=lo_x, hi_x=hi_x):
                xv = np.asarray(x, dtype=float)
                out = dspl(np.clip(xv, lo_x, hi_x))
                return np.where((xv < lo_x) | (xv > hi_x), 0.0, out)

            if abs(lo_v - up_target) > 1e-8:
                raise GeometryError(
                    f"tabulated {key} wall must start at upstream height {up_target:g}"
                )
            walls.append((f, df, hi_v))
        (f1, df1, a), (f2, df2, b) = walls
        return _validate(NozzleGeometry("tabulated", f1, f2, df1, df2, a, b))

    raise GeometryError(
        f"unknown nozzle family {family!r}; supported: {', '.join(_FAMILIES)}"
    )


@dataclass(frozen=True)
class Domain:
    """Finite nozzle section |x1| <= L."""

    nozzle: NozzleGeometry
    L: float

    def __post_init__(self):
        if not (self.L > 0.0):
            raise GeometryError("section half-length L must be positive")


def truncate(nozzle: NozzleGeometry, L: float) -> Domain:
    return Domain(nozzle, float(L))


@dataclass
class Mesh:
    """Wall-fitted structured mesh on a finite section.

    Node (i, j) sits at (xi[i], x2[i, j]) with
    x2 = (1-eta[j])*f1(xi[i]) + eta[j]*f2(xi[i]).  Arrays f1x, wx, df1x,
    dwx cache the wall values and slopes at the xi nodes for the mapped
    derivative formulas.
    """

    domain: Domain
    xi: np.ndarray
    eta: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    f1x: np.ndarray
    wx: np.ndarray
    df1x: np.ndarray
    dwx: np.ndarray

    @property
    def n_xi(self) -> int:
        return self.xi.size

    @property
    def n_eta(self) -> int:
        return self.eta.size

    @property
    def n_nodes(self) -> int:
        return self.xi.size * self.eta.size

    @property
    def L(self) -> float:
        return self.domain.L

    @property
    def dxi(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def deta(self) -> float:
        return float(self.eta[1] - self.eta[0])


def generate_mesh(domain: Domain, n_xi: int, n_eta: int) -> Mesh:
    """Uniform (xi, eta) grid mapped between the walls; cells must stay
    positively oriented (checked through the corner Jacobians)."""
    if n_xi < 3 or n_eta < 3:
        raise GeometryError("mesh needs at least 3 nodes per direction")
    noz = domain.nozzle
    xi = np.linspace(-domain.L, domain.L, n_xi)
    eta = np.linspace(0.0, 1.0, n_eta)
    f1x = np.asarray(noz.f1(xi), dtype=float)
    f2x = np.asarray(noz.f2(xi), dtype=float)
    df1x = np.asarray(noz.df1(xi), dtype=float)
    dwx = np.asarray(noz.df2(xi), dtype=float) - df1x
    wx = f2x - f1x
    if np.any(wx <= 0.0):
        raise GeometryError("walls cross inside the meshed section")
    x2 = (1.0 - eta)[None, :] * f1x[:, None] + eta[None, :] * f2x[:, None]
    x1 = np.broadcast_to(xi[:, None], x2.shape).copy()
    # with graph walls every cell is a vertical-sided trapezoid, so positive
    # width is the only orientation condition
    return Mesh(domain, xi, eta, x1, x2, f1x, wx, df1x, dwx)


@dataclass
class BoundaryData:
    """Dirichlet data on the section boundary plus a blended interior seed.

    values holds the prescribed psi on boundary nodes (mask True) and a
    transfinite blend of the end-column data in the interior, which the
    solver uses as its starting iterate.
    """

    values: np.ndarray
    mask: np.ndarray
    mode: str


def boundary_values(mesh: Mesh, m: float, mode: str = "linear", farfield=None) -> BoundaryData:
    """Dirichlet data: walls carry 0 and m in both modes.

    mode "linear": psi = eta*m on the whole boundary (the linear-in-height
    data of the truncated problem).  mode "farfield_profile": the far-field
    cumulative-flux profiles are imposed on the artificial ends instead,
    evaluated at each node's physical height; corners keep wall values.
    """
    if not (m > 0.0):
        raise GeometryError("mass flux m must be positive")
    n_xi, n_eta = mesh.n_xi, mesh.n_eta
    eta = mesh.eta
    if mode == "linear":
        left = m * eta
        right = m * eta
    elif mode == "farfield_profile":
        if farfield is None:
            raise GeometryError("farfield_profile boundary data needs far-field states")
        left = np.asarray(farfield.psi_upstream(np.clip(mesh.x2[0, :], 0.0, 1.0)), dtype=float)
        right = np.asarray(
            farfield.psi_downstream(np.clip(mesh.x2[-1, :], farfield.a, farfield.b)),
            dtype=float,
        )
        left[0], left[-1] = 0.0, m
        right[0], right[-1] = 0.0, m
    else:
        raise GeometryError(
            f"unknown boundary mode {mode!r}; supported: linear, farfield_profile"
        )

    t = (mesh.xi + mesh.L) / (2.0 * mesh.L)
    values = (1.0 - t)[:, None] * left[None, :] + t[:, None] * right[None, :]
    values[:, 0] = 0.0
    values[:, -1] = m
    values[0, :] = left
    values[-1, :] = right
    mask = np.zeros((n_xi, n_eta), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return BoundaryData(values=values, mask=mask, mode=mode)
