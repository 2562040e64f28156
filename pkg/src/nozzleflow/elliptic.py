"""Truncated quasilinear elliptic solver for the stream function.

The steady flow is found from div(grad(psi) / H) = H * Ft(psi) * Ft'(psi)
where H is the density expressed through |grad psi|^2 and the Bernoulli
function of the streamline.  To keep the problem uniformly elliptic for
arbitrary iterates, the momentum-squared argument is truncated below the
sonic value by a smooth cutoff before the subsonic branch inverse is
applied.  On strictly subsonic solutions the cutoff is inactive and the
truncated problem coincides with the physical one.

The nonlinear problem is solved by a damped Picard iteration: freezing H
and the source at the current iterate gives a symmetric positive definite
bilinear form, discretized with isoparametric Q1 elements and 2x2 Gauss
quadrature on the wall-fitted mesh, and solved by a sparse direct solver
after eliminating the Dirichlet rows.  Infinite nozzles are approached by
solving on sections of doubling length until the solution near the ends
settles onto the far-field profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from . import gas as G
from .geometry import (
    BoundaryData,
    GeometryError,
    Mesh,
    NozzleGeometry,
    boundary_values,
    generate_mesh,
    truncate,
)

__all__ = [
    "SolverError",
    "cutoff",
    "cutoff_deriv",
    "TruncatedCoefficients",
    "truncated_density",
    "truncation_eps",
    "ElementOps",
    "assemble",
    "solve_dirichlet",
    "SolveResult",
    "solve_bvp",
    "farfield_deviation",
    "ContinuationResult",
    "continuation_solve",
]

_GP = 1.0 / np.sqrt(3.0)


class SolverError(RuntimeError):
    """Raised when the elliptic solve cannot proceed."""


def cutoff(s, eps):
    """Smooth truncation of the momentum-squared excess.

    Identity for s <= -2*eps, frozen at -eps for s >= -eps, joined by a
    quintic Hermite blend with matching value and slope at both ends
    (slopes 1 and 0).  The output never exceeds -eps, which keeps the
    truncated state a fixed distance below sonic.
    """
    sv = np.asarray(s, dtype=float)
    e = float(eps)
    if not e > 0.0:
        raise ValueError("cutoff margin eps must be positive")
    t = np.clip((sv + 2.0 * e) / e, 0.0, 1.0)
    g = t + 4.0 * t**3 - 7.0 * t**4 + 3.0 * t**5
    out = np.where(sv <= -2.0 * e, sv, -2.0 * e + e * g)
    return float(out) if out.ndim == 0 else out


def cutoff_deriv(s, eps):
    """Derivative of the truncation; ranges over [0, g'max] with g'max about 1.512."""
    sv = np.asarray(s, dtype=float)
    e = float(eps)
    t = np.clip((sv + 2.0 * e) / e, 0.0, 1.0)
    gp = 1.0 + 12.0 * t**2 - 28.0 * t**3 + 15.0 * t**4
    out = np.where(sv <= -2.0 * e, 1.0, np.where(sv >= -e, 0.0, gp))
    return float(out) if out.ndim == 0 else out


def truncation_eps(gas: G.GasLaw, farfield, eps0_scale: float = 0.05) -> float:
    """Truncation margin: a fixed fraction of the smallest critical
    momentum squared across the Bernoulli range of the data."""
    sig = G.critical_flux(gas, farfield.B.b_min)
    return float(eps0_scale) * float(sig) ** 2


@dataclass
class TruncatedCoefficients:
    """Pointwise modified-density package at a set of evaluation points."""

    htilde: np.ndarray  # truncated density
    h1: np.ndarray  # d htilde / d |grad psi|^2 (nonpositive)
    bern: np.ndarray  # Bernoulli value of the streamline data
    delta: np.ndarray  # truncated momentum squared fed to the branch inverse
    excess: np.ndarray  # |grad psi|^2 - critical momentum squared (margin)
    active: np.ndarray  # where the cutoff departs from the identity


def truncated_density(gas: G.GasLaw, grad_sq, bern, eps) -> TruncatedCoefficients:
    """Evaluate the truncated density and its slope in |grad psi|^2."""
    gsq = np.asarray(grad_sq, dtype=float)
    bv = np.broadcast_to(np.asarray(bern, dtype=float), gsq.shape)
    sig_sq = G.critical_flux(gas, bv) ** 2
    excess = gsq - sig_sq
    delta = cutoff(excess, eps) + sig_sq
    htilde = G.subsonic_density(gas, delta, bv)
    c2 = G.sound_speed_sq(gas, htilde)
    q_sq = delta / htilde**2
    dzeta = cutoff_deriv(excess, eps)
    h1 = -dzeta / (2.0 * htilde * (c2 - q_sq))
    active = excess > -2.0 * float(eps)
    return TruncatedCoefficients(
        htilde=htilde, h1=h1, bern=bv, delta=delta, excess=excess, active=active
    )


class ElementOps:
    """Precomputed isoparametric Q1 data for a logically rectangular grid.

    Holds connectivity, shape values, physical shape gradients, and
    weighted Jacobians at the four Gauss points of every cell, plus the
    scatter indices for sparse assembly.
    """

    def __init__(self, x1: np.ndarray, x2: np.ndarray):
        n_xi, n_eta = x1.shape
        idx = np.arange(n_xi * n_eta).reshape(n_xi, n_eta)
        conn = np.stack(
            [
                idx[:-1, :-1].ravel(),
                idx[1:, :-1].ravel(),
                idx[1:, 1:].ravel(),
                idx[:-1, 1:].ravel(),
            ],
            axis=1,
        )
        self.n_nodes = n_xi * n_eta
        self.n_cells = conn.shape[0]
        self.conn = conn
        self.rows = np.repeat(conn, 4, axis=1).ravel()
        self.cols = np.tile(conn, (1, 4)).ravel()

        X = x1.ravel()[conn]
        Y = x2.ravel()[conn]
        self.shape = []
        self.dshape_x = []
        self.dshape_y = []
        self.wdet = []
        for r, s in ((-_GP, -_GP), (_GP, -_GP), (_GP, _GP), (-_GP, _GP)):
            N = 0.25 * np.array(
                [(1 - r) * (1 - s), (1 + r) * (1 - s), (1 + r) * (1 + s), (1 - r) * (1 + s)]
            )
            dNdr = 0.25 * np.array([-(1 - s), (1 - s), (1 + s), -(1 + s)])
            dNds = 0.25 * np.array([-(1 - r), -(1 + r), (1 + r), (1 - r)])
            j11 = X @ dNdr
            j12 = Y @ dNdr
            j21 = X @ dNds
            j22 = Y @ dNds
            det = j11 * j22 - j12 * j21
            if np.any(det <= 0.0):
                raise SolverError("mesh cell with nonpositive Jacobian")
            dNdx = (j22[:, None] * dNdr[None, :] - j12[:, None] * dNds[None, :]) / det[:, None]
            dNdy = (-j21[:, None] * dNdr[None, :] + j11[:, None] * dNds[None, :]) / det[:, None]
            self.shape.append(N)
            self.dshape_x.append(dNdx)
            self.dshape_y.append(dNdy)
            self.wdet.append(det)

    @staticmethod
    def from_mesh(mesh: Mesh) -> "ElementOps":
        return ElementOps(mesh.x1, mesh.x2)

    def interpolate(self, psi_flat: np.ndarray):
        """Values and physical gradients of a nodal field at all Gauss
        points; each returned array has shape (4, n_cells)."""
        pe = psi_flat[self.conn]
        vals = np.stack([pe @ N for N in self.shape])
        gx = np.stack([np.sum(pe * D, axis=1) for D in self.dshape_x])
        gy = np.stack([np.sum(pe * D, axis=1) for D in self.dshape_y])
        return vals, gx, gy


def assemble(ops: ElementOps, a_gauss: np.ndarray, f_gauss: np.ndarray):
    """Stiffness matrix and load vector of the frozen-coefficient form

        integral a grad(psi).grad(phi) = - integral f phi

    with a and f given at the Gauss points, shape (4, n_cells)."""
    data = np.zeros((ops.n_cells, 4, 4))
    load = np.zeros((ops.n_cells, 4))
    for g in range(4):
        w = ops.wdet[g] * a_gauss[g]
        dx = ops.dshape_x[g]
        dy = ops.dshape_y[g]
        data += w[:, None, None] * (
            dx[:, :, None] * dx[:, None, :] + dy[:, :, None] * dy[:, None, :]
        )
        load -= (ops.wdet[g] * f_gauss[g])[:, None] * ops.shape[g][None, :]
    K = sparse.coo_matrix(
        (data.ravel(), (ops.rows, ops.cols)), shape=(ops.n_nodes, ops.n_nodes)
    ).tocsr()
    b = np.zeros(ops.n_nodes)
    np.add.at(b, ops.conn.ravel(), load.ravel())
    return K, b


def solve_dirichlet(K, b, values_flat: np.ndarray, mask_flat: np.ndarray) -> np.ndarray:
    """Solve K x = b with x prescribed on the masked nodes."""
    free = ~mask_flat
    x = values_flat.astype(float).copy()
    rhs = b[free] - K[free][:, mask_flat] @ x[mask_flat]
    x[free] = spsolve(K[free][:, free].tocsc(), rhs)
    return x


@dataclass
class SolveResult:
    """Converged (or final) state of the damped Picard iteration."""

    psi: np.ndarray
    mesh: Mesh
    bdata: BoundaryData
    converged: bool
    iterations: int
    increments: np.ndarray
    eps: float
    truncation_active: bool
    truncation_fraction: float
    subsonic_margin: float
    ellipticity: tuple
    damping_final: float


def _gauss_coefficients(gas, farfield, ops, psi_flat, eps):
    vals, gx, gy = ops.interpolate(psi_flat)
    grad_sq = gx**2 + gy**2
    bern = farfield.bernoulli(vals)
    co = truncated_density(gas, grad_sq, bern, eps)
    source = np.asarray(farfield.source_coeff(vals)) * co.htilde
    return co, source, grad_sq


def solve_bvp(
    gas: G.GasLaw,
    farfield,
    mesh: Mesh,
    bdata: BoundaryData,
    eps: Optional[float] = None,
    eps0_scale: float = 0.05,
    damping: float = 0.7,
    tol: float = 1e-10,
    max_iter: int = 200,
    psi0: Optional[np.ndarray] = None,
) -> SolveResult:
    """Damped Picard iteration for the truncated stream-function problem.

    The iteration freezes the truncated density and source at the current
    iterate, solves the resulting linear Dirichlet problem, and blends the
    update with factor damping (halved whenever the increment grows).  It
    stops when the undamped update, relative to the mass flux, falls
    below tol.
    """
    if eps is None:
        eps = truncation_eps(gas, farfield, eps0_scale)
    if not eps > 0.0:
        raise SolverError("truncation margin must be positive")
    m = float(bdata.values[0, -1])
    ops = ElementOps.from_mesh(mesh)
    mask_flat = bdata.mask.ravel()
    psi = (bdata.values if psi0 is None else psi0).astype(float).copy()
    if psi0 is not None:
        psi[bdata.mask] = bdata.values[bdata.mask]
    theta = float(damping)
    increments = []
    converged = False
    prev = np.inf
    for it in range(1, max_iter + 1):
        co, source, _ = _gauss_coefficients(gas, farfield, ops, psi.ravel(), eps)
        K, b = assemble(ops, 1.0 / co.htilde, source)
        psi_star = solve_dirichlet(K, b, psi.ravel(), mask_flat).reshape(psi.shape)
        inc = float(np.max(np.abs(psi_star - psi))) / m
        increments.append(inc)
        if inc <= tol:
            psi = psi_star
            converged = True
            break
        if inc > prev:
            theta = max(0.5 * theta, 0.05)
        psi = psi + theta * (psi_star - psi)
        prev = inc

    co, _, grad_sq = _gauss_coefficients(gas, farfield, ops, psi.ravel(), eps)
    lam1 = 1.0 / co.htilde
    lam2 = lam1 - 2.0 * co.h1 * grad_sq / co.htilde**2
    return SolveResult(
        psi=psi,
        mesh=mesh,
        bdata=bdata,
        converged=converged,
        iterations=len(increments),
        increments=np.asarray(increments),
        eps=float(eps),
        truncation_active=bool(np.any(co.active)),
        truncation_fraction=float(np.mean(co.active)),
        subsonic_margin=float(np.max(co.excess)),
        ellipticity=(float(min(lam1.min(), lam2.min())), float(max(lam1.max(), lam2.max()))),
        damping_final=theta,
    )


def farfield_deviation(mesh: Mesh, psi: np.ndarray, farfield) -> tuple:
    """Sup distance between the solution and the far-field cumulative-flux
    profiles, sampled on the columns halfway to each end of the section."""
    im = int(np.argmin(np.abs(mesh.xi + 0.5 * mesh.L)))
    ip = int(np.argmin(np.abs(mesh.xi - 0.5 * mesh.L)))
    up = farfield.psi_upstream(np.clip(mesh.x2[im], 0.0, 1.0))
    dn = farfield.psi_downstream(np.clip(mesh.x2[ip], farfield.a, farfield.b))
    dev_minus = float(np.max(np.abs(psi[im] - np.asarray(up))))
    dev_plus = float(np.max(np.abs(psi[ip] - np.asarray(dn))))
    return dev_minus, dev_plus


@dataclass
class ContinuationResult:
    """Outcome of the section-length continuation."""

    result: SolveResult
    L: float
    farfield_dev: tuple
    levels: list = field(default_factory=list)

    @property
    def psi(self) -> np.ndarray:
        return self.result.psi

    @property
    def mesh(self) -> Mesh:
        return self.result.mesh


def continuation_solve(
    gas: G.GasLaw,
    farfield,
    nozzle: NozzleGeometry,
    m: float,
    n_xi: int = 401,
    n_eta: int = 41,
    L0: float = 8.0,
    L_max: float = 32.0,
    bc_mode: str = "linear",
    eps0_scale: float = 0.05,
    damping: float = 0.7,
    tol_nonlinear: float = 1e-10,
    tol_farfield: float = 1e-6,
    max_iter: int = 200,
) -> ContinuationResult:
    """Solve on sections of doubling half-length until the interior
    settles onto the far-field profiles (or L_max is reached).

    The node count is held fixed while L doubles; each level starts from
    the previous solution interpolated onto the longer section.
    """
    eps = truncation_eps(gas, farfield, eps0_scale)
    L = float(L0)
    prev_mesh = None
    prev_psi = None
    levels = []
    while True:
        mesh = generate_mesh(truncate(nozzle, L), n_xi, n_eta)
        bdata = boundary_values(mesh, m, mode=bc_mode, farfield=farfield)
        psi0 = None
        if prev_psi is not None:
            psi0 = bdata.values.copy()
            inner = np.abs(mesh.xi) <= prev_mesh.L
            for j in range(n_eta):
                psi0[inner, j] = np.interp(
                    mesh.xi[inner], prev_mesh.xi, prev_psi[:, j]
                )
        res = solve_bvp(
            gas,
            farfield,
            mesh,
            bdata,
            eps=eps,
            damping=damping,
            tol=tol_nonlinear,
            max_iter=max_iter,
            psi0=psi0,
        )
        dev = farfield_deviation(mesh, res.psi, farfield)
        levels.append(
            {
                "L": L,
                "dev_minus": dev[0],
                "dev_plus": dev[1],
                "iterations": res.iterations,
                "converged": res.converged,
            }
        )
        if max(dev) <= tol_farfield or 2.0 * L > L_max:
            return ContinuationResult(result=res, L=L, farfield_dev=dev, levels=levels)
        prev_mesh, prev_psi = mesh, res.psi
        L *= 2.0
