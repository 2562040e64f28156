"""Physical field recovery and flow diagnostics.

The solver returns the stream function on the wall-fitted mesh.  This
module turns it into primitive fields (density, velocity, Mach number),
checks the conservation statements a steady flow must satisfy (constant
mass flux through sections, Bernoulli invariance along streamlines, the
vorticity-source balance), and provides a high-accuracy one-dimensional
profile for straight channels used as a reference solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline, RectBivariateSpline

from . import gas as G
from .elliptic import farfield_deviation
from .geometry import Mesh

__all__ = [
    "FlowField",
    "StreamlineError",
    "nodal_gradients",
    "stream_margin",
    "recover_fields",
    "mass_flux_error",
    "trace_streamline",
    "bernoulli_drift",
    "vorticity_residual",
    "solve_strip_profile",
    "diagnostics",
]


class StreamlineError(RuntimeError):
    """Raised when a traced streamline leaves the channel or stalls."""


@dataclass
class FlowField:
    """Primitive flow fields on the structured grid (node layout (i, j)
    running over x1 then x2)."""

    x1: np.ndarray
    x2: np.ndarray
    psi: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    mach: np.ndarray
    mesh: Optional[Mesh] = None

    @property
    def n_xi(self) -> int:
        return self.x1.shape[0]

    @property
    def n_eta(self) -> int:
        return self.x1.shape[1]

    @staticmethod
    def from_columns(cols: dict, n_xi: int, n_eta: int) -> "FlowField":
        """Rebuild a field from flat per-node columns (row order: x2 index
        fastest)."""
        shaped = {
            k: np.asarray(cols[k], dtype=float).reshape(n_xi, n_eta)
            for k in ("x1", "x2", "psi", "rho", "u", "v", "mach")
        }
        return FlowField(**shaped)


def nodal_gradients(mesh: Mesh, psi: np.ndarray):
    """Physical gradient of a nodal field by second-order differences.

    Differences are taken on the uniform (xi, eta) grid (one-sided at the
    boundary) and pushed through the wall-fitted map, whose inverse has
    eta_x1 = -(f1' + eta w') / w and eta_x2 = 1 / w.
    """
    g_xi = np.gradient(psi, mesh.dxi, axis=0, edge_order=2)
    g_eta = np.gradient(psi, mesh.deta, axis=1, edge_order=2)
    slope = (mesh.df1x[:, None] + mesh.eta[None, :] * mesh.dwx[:, None]) / mesh.wx[:, None]
    d_x1 = g_xi - g_eta * slope
    d_x2 = g_eta / mesh.wx[:, None]
    return d_x1, d_x2


def stream_margin(gas: G.GasLaw, farfield, mesh: Mesh, psi: np.ndarray) -> float:
    """Largest nodal excess of |grad psi|^2 over the critical momentum
    squared of the streamline data; negative means strictly subsonic."""
    d1, d2 = nodal_gradients(mesh, psi)
    bern = farfield.bernoulli(psi)
    sig_sq = G.critical_flux(gas, bern) ** 2
    return float(np.max(d1**2 + d2**2 - sig_sq))


def recover_fields(gas: G.GasLaw, farfield, mesh: Mesh, psi: np.ndarray) -> FlowField:
    """Primitive fields from the stream function.

    The density solves the subsonic momentum relation with the node's
    untruncated |grad psi|^2; if any node carries sonic or supersonic
    momentum the recovery raises, naming the worst locations.
    """
    d1, d2 = nodal_gradients(mesh, psi)
    grad_sq = d1**2 + d2**2
    bern = farfield.bernoulli(psi)
    sig_sq = G.critical_flux(gas, bern) ** 2
    excess = grad_sq - sig_sq
    if np.max(excess) >= 0.0:
        flat = np.argsort(excess.ravel())[::-1][:3]
        spots = ", ".join(
            "x1=%.4g x2=%.4g (excess %.3e)"
            % (mesh.x1.ravel()[k], mesh.x2.ravel()[k], excess.ravel()[k])
            for k in flat
        )
        raise G.SupersonicStateError(
            "stream gradient reaches the critical momentum; cannot recover "
            "subsonic fields at: " + spots
        )
    rho = G.subsonic_density(gas, grad_sq, bern)
    u = d2 / rho
    v = -d1 / rho
    mach = np.sqrt((u**2 + v**2) / G.sound_speed_sq(gas, rho))
    return FlowField(
        x1=mesh.x1.copy(),
        x2=mesh.x2.copy(),
        psi=psi.copy(),
        rho=rho,
        u=u,
        v=v,
        mach=mach,
        mesh=mesh,
    )


def mass_flux_error(field: FlowField, m: float) -> float:
    """Largest deviation of the sectional flux integral from m across all
    mesh columns (Simpson rule on the column nodes)."""
    flux = simpson(field.rho * field.u, x=field.x2, axis=1)
    return float(np.max(np.abs(flux - m)))


def _channel_eta(mesh: Mesh, x1: float, x2: float) -> float:
    noz = mesh.domain.nozzle
    f1 = float(np.asarray(noz.f1(x1)))
    w = float(np.asarray(noz.f2(x1))) - f1
    return (x2 - f1) / w


def trace_streamline(
    field: FlowField,
    start,
    step_scale: float = 0.25,
    x1_stop: Optional[float] = None,
    max_steps: int = 200000,
) -> np.ndarray:
    """Integrate the velocity field from start until x1 reaches x1_stop.

    Classical fourth-order Runge-Kutta with a step bounded by a fraction
    of the smallest cell; velocities come from bicubic interpolation on
    the (xi, eta) grid.  Raises if the path leaves the channel or the
    streamwise velocity stops being positive.
    """
    mesh = field.mesh
    if mesh is None:
        raise StreamlineError("field carries no mesh; cannot trace")
    U = RectBivariateSpline(mesh.xi, mesh.eta, field.u, kx=3, ky=3)
    V = RectBivariateSpline(mesh.xi, mesh.eta, field.v, kx=3, ky=3)
    if x1_stop is None:
        x1_stop = float(mesh.xi[-1]) - mesh.dxi
    min_cell = min(mesh.dxi, float(np.min(mesh.wx)) * mesh.deta)

    def vel(p):
        eta = _channel_eta(mesh, p[0], p[1])
        if eta < -0.02 or eta > 1.02:
            raise StreamlineError(
                f"streamline left the channel near x1={p[0]:.4g}, x2={p[1]:.4g}"
            )
        ec = min(max(eta, 0.0), 1.0)
        u = float(U(p[0], ec)[0, 0])
        v = float(V(p[0], ec)[0, 0])
        if u <= 0.0:
            raise StreamlineError(
                f"nonpositive streamwise velocity at x1={p[0]:.4g}, x2={p[1]:.4g}"
            )
        return np.array([u, v])

    p = np.array(start, dtype=float)
    pts = [p.copy()]
    for _ in range(max_steps):
        if p[0] >= x1_stop:
            break
        k1 = vel(p)
        h = step_scale * min_cell / float(np.hypot(*k1))
        h = min(h, x1_stop - p[0] + 1e-12)
        k2 = vel(p + 0.5 * h * k1)
        k3 = vel(p + 0.5 * h * k2)
        k4 = vel(p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        pts.append(p.copy())
    else:
        raise StreamlineError("streamline did not reach the outflow column")
    return np.asarray(pts)


def bernoulli_drift(gas: G.GasLaw, field: FlowField, farfield, eta_seeds=(0.25, 0.5, 0.75)) -> float:
    """Largest deviation of h(rho) + q^2/2 along traced streamlines from
    the Bernoulli value carried by the seed's stream-function level."""
    mesh = field.mesh
    R = RectBivariateSpline(mesh.xi, mesh.eta, field.rho, kx=3, ky=3)
    U = RectBivariateSpline(mesh.xi, mesh.eta, field.u, kx=3, ky=3)
    V = RectBivariateSpline(mesh.xi, mesh.eta, field.v, kx=3, ky=3)
    P = RectBivariateSpline(mesh.xi, mesh.eta, field.psi, kx=3, ky=3)
    worst = 0.0
    x1s = float(mesh.xi[0]) + mesh.dxi
    noz = mesh.domain.nozzle
    f1 = float(np.asarray(noz.f1(x1s)))
    w = float(np.asarray(noz.f2(x1s))) - f1
    for es in eta_seeds:
        start = (x1s, f1 + es * w)
        path = trace_streamline(field, start)
        etas = np.array([_channel_eta(mesh, p[0], p[1]) for p in path])
        etas = np.clip(etas, 0.0, 1.0)
        rho = R(path[:, 0], etas, grid=False)
        q_sq = U(path[:, 0], etas, grid=False) ** 2 + V(path[:, 0], etas, grid=False) ** 2
        bern = G.enthalpy(gas, rho) + 0.5 * q_sq
        ref = float(farfield.bernoulli(float(P(start[0], es)[0, 0])))
        worst = max(worst, float(np.max(np.abs(bern - ref))))
    return worst


def vorticity_residual(gas: G.GasLaw, field: FlowField, farfield) -> float:
    """Sup over interior nodes of |omega / rho + Ft Ft'(psi)|.

    For an exact steady flow the specific vorticity omega / rho equals
    -Ft Ft'(psi), so this measures how well the recovered velocity
    satisfies the original system rather than the truncated one.
    """
    mesh = field.mesh
    dv_dx1, _ = nodal_gradients(mesh, field.v)
    _, du_dx2 = nodal_gradients(mesh, field.u)
    omega = dv_dx1 - du_dx2
    resid = omega / field.rho + np.asarray(farfield.source_coeff(field.psi))
    return float(np.max(np.abs(resid[1:-1, 1:-1])))


def solve_strip_profile(gas: G.GasLaw, farfield, m: float, n: int = 8193):
    """Reference stream-function profile psi(x2) for a straight channel.

    Integrates the characteristic system of the one-dimensional problem,
    psi' = rho u and u' = Ft Ft'(psi) rho with rho recovered from the
    Bernoulli relation, and shoots on u(0) to land psi(1) = m.  Returns
    (x2 nodes, psi values, u values, spline) with the spline interpolating
    psi.  The subsonic root is selected.
    """
    grid = np.linspace(0.0, float(m), 65537)
    f_t = np.asarray(farfield.Fext(grid), dtype=float)
    fp_t = np.asarray(farfield.Fext_prime(grid), dtype=float)
    bern_t = farfield.h_rho0 + 0.5 * f_t**2
    b_max = float(np.max(bern_t))

    def rhs(psi, z):
        pc = np.clip(psi, 0.0, m)
        bern = np.interp(pc, grid, bern_t)
        arg = bern - 0.5 * z * z
        if gas.kind == "polytropic":
            arg = np.maximum(arg, 1e-12)
        rho = G.enthalpy_inverse(gas, arg)
        src = np.interp(pc, grid, f_t) * np.interp(pc, grid, fp_t)
        return rho * z, src * rho

    def sweep(z0, nn, keep=False):
        h = 1.0 / (nn - 1)
        psi = np.zeros_like(np.asarray(z0, dtype=float))
        z = np.asarray(z0, dtype=float).copy()
        path = [psi.copy()] if keep else None
        for _ in range(nn - 1):
            dp1, dz1 = rhs(psi, z)
            dp2, dz2 = rhs(psi + 0.5 * h * dp1, z + 0.5 * h * dz1)
            dp3, dz3 = rhs(psi + 0.5 * h * dp2, z + 0.5 * h * dz2)
            dp4, dz4 = rhs(psi + h * dp3, z + h * dz3)
            psi = psi + (h / 6.0) * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
            z = z + (h / 6.0) * (dz1 + 2.0 * dz2 + 2.0 * dz3 + dz4)
            if keep:
                path.append(psi.copy())
        if keep:
            return psi, z, np.asarray(path)
        return psi

    # bracket the subsonic branch of the shooting map on a coarse step,
    # then polish the root on the fine step
    n_coarse = 1025
    rho_c0 = G.sonic_density(gas, float(bern_t[0]))
    z_cap = 1.2 * float(np.sqrt(G.sound_speed_sq(gas, rho_c0)))
    cand = np.linspace(1e-9, z_cap, 257)
    ends = sweep(cand, n_coarse)
    peak = int(np.argmax(ends))
    if ends[peak] < m:
        raise G.SupersonicStateError(
            "no subsonic channel profile carries the requested mass flux "
            f"(max attainable {ends[peak]:.6g} < {m:.6g})"
        )
    kk = int(np.searchsorted(ends[: peak + 1], m))
    lo, hi = cand[kk - 1], cand[kk]
    glo, ghi = ends[kk - 1], ends[kk]
    for _ in range(3):
        sub = np.linspace(lo, hi, 33)
        es = sweep(sub, n_coarse)
        jj = min(max(int(np.searchsorted(es, m)), 1), 32)
        lo, hi = sub[jj - 1], sub[jj]
        glo, ghi = es[jj - 1], es[jj]
    z0 = lo + (m - glo) * (hi - lo) / (ghi - glo)
    end, _, path = sweep(np.array([z0]), n, keep=True)
    err = float(end[0]) - m
    if abs(err) > 1e-12 * m:
        z0 -= err * (hi - lo) / (ghi - glo)
        end, _, path = sweep(np.array([z0]), n, keep=True)
        err = float(end[0]) - m
    psi_prof = path[:, 0]
    if abs(err) > 1e-10 * m:
        raise G.SupersonicStateError(
            "channel profile shooting did not converge to the requested flux"
        )
    y = np.linspace(0.0, 1.0, n)
    # velocities along the profile follow from the carried Bernoulli data
    u_prof = np.asarray(farfield.Fext(np.clip(psi_prof, 0.0, m)))
    return y, psi_prof, u_prof, CubicSpline(y, psi_prof)


def diagnostics(gas: G.GasLaw, farfield, result, field: Optional[FlowField] = None) -> dict:
    """Assemble the verification summary for a solve.

    Field-level entries are None when the recovered subsonic fields do
    not exist (truncated or otherwise inconsistent solutions).
    """
    mesh = result.mesh
    psi = result.psi
    m = float(result.bdata.values[0, -1])
    margin = stream_margin(gas, farfield, mesh, psi)
    dev_minus, dev_plus = farfield_deviation(mesh, psi, farfield)
    out = {
        "mass_flux_max_err": None,
        "bernoulli_max_drift": None,
        "vorticity_sup_residual": None,
        "subsonic_margin": margin,
        "farfield_dev_minus": dev_minus,
        "farfield_dev_plus": dev_plus,
        "psi_min": float(np.min(psi)),
        "psi_max": float(np.max(psi)),
        "min_u": None,
        "euler_consistent": False,
    }
    if field is None and margin < 0.0:
        try:
            field = recover_fields(gas, farfield, mesh, psi)
        except G.SupersonicStateError:
            field = None
    if field is not None:
        out["mass_flux_max_err"] = mass_flux_error(field, m)
        out["bernoulli_max_drift"] = bernoulli_drift(gas, field, farfield)
        out["vorticity_sup_residual"] = vorticity_residual(gas, field, farfield)
        out["min_u"] = float(np.min(field.u))
    bounds_ok = (
        out["psi_min"] >= -1e-8 * m and out["psi_max"] <= m * (1.0 + 1e-8)
    )
    out["euler_consistent"] = bool(
        (not result.truncation_active)
        and bounds_ok
        and margin < 0.0
        and out["min_u"] is not None
        and out["min_u"] > 0.0
    )
    return out
