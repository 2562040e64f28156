"""Report figures rendered next to the delimited outputs.

Every renderer writes PNG files into a directory and returns the list
of paths so the run summary can point at them.  The Agg backend is
forced so the module works in headless runs.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_solve", "render_farfield", "render_critical"]


def _save(fig, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _wall_overlay(ax, mesh):
    ax.plot(mesh.x1[:, 0], mesh.x2[:, 0], color="black", lw=1.0)
    ax.plot(mesh.x1[:, -1], mesh.x2[:, -1], color="black", lw=1.0)


def render_solve(field, result, cont, ff, out_dir: str) -> list:
    """Field, convergence-history, and far-field figures for one solve."""
    paths = []
    mesh = result.mesh

    fig, axes = plt.subplots(
        2 if field is not None else 1, 1, figsize=(9.0, 6.5), squeeze=False
    )
    ax = axes[0][0]
    cs = ax.contour(
        mesh.x1, mesh.x2, result.psi, levels=15, colors="tab:blue", linewidths=0.8
    )
    ax.clabel(cs, inline=True, fontsize=7, fmt="%.3g")
    _wall_overlay(ax, mesh)
    ax.set_title("stream function")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if field is not None:
        ax2 = axes[1][0]
        pc = ax2.pcolormesh(field.x1, field.x2, field.mach, shading="gouraud")
        fig.colorbar(pc, ax=ax2, label="Mach")
        _wall_overlay(ax2, mesh)
        ax2.set_title("Mach number")
        ax2.set_xlabel("x1")
        ax2.set_ylabel("x2")
    paths.append(_save(fig, out_dir, "flow_field.png"))

    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.semilogy(
        np.arange(1, len(result.increments) + 1),
        np.maximum(result.increments, 1e-300),
        marker="o",
        ms=3,
    )
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative update")
    levels = ", ".join(
        f"L={lv['L']:g}: dev={max(lv['dev_minus'], lv['dev_plus']):.2e}"
        for lv in cont.levels
    )
    ax.set_title(f"fixed-point convergence (final section)\n{levels}", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    paths.append(_save(fig, out_dir, "convergence.png"))

    paths.append(render_farfield(ff, out_dir)[0])
    return paths


def render_farfield(ff, out_dir: str) -> list:
    """Upstream and downstream velocity and stream-function profiles."""
    y_up = np.linspace(0.0, 1.0, 401)
    y_dn = np.linspace(ff.a, ff.b, 401)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    ax1.plot(ff.u0(y_up), y_up, label="upstream u0")
    ax1.plot(ff.u1(y_dn), y_dn, label="downstream u1")
    ax1.set_xlabel("horizontal velocity")
    ax1.set_ylabel("x2")
    ax1.legend()
    ax1.grid(alpha=0.3)
    ax2.plot(ff.psi_upstream(y_up), y_up, label="upstream")
    ax2.plot(ff.psi_downstream(y_dn), y_dn, label="downstream")
    ax2.set_xlabel("stream function")
    ax2.set_ylabel("x2")
    ax2.legend()
    ax2.grid(alpha=0.3)
    fig.suptitle(f"far-field profiles (rho0={ff.rho0:.6g}, rho1={ff.rho1:.6g})")
    return [_save(fig, out_dir, "farfield_profiles.png")]


def render_critical(result, out_dir: str) -> list:
    """Margin samples against mass flux with the final bracket marked."""
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    acc = [s for s in result.samples if s.accepted]
    rej = [s for s in result.samples if not s.accepted]
    if acc:
        ax.plot(
            [s.m for s in acc],
            [s.margin for s in acc],
            "o",
            color="tab:green",
            label="accepted",
        )
    got_margin = [s for s in rej if s.margin is not None]
    if got_margin:
        ax.plot(
            [s.m for s in got_margin],
            [s.margin for s in got_margin],
            "x",
            color="tab:red",
            label="rejected",
        )
    no_margin = [s for s in rej if s.margin is None]
    if no_margin:
        ax.plot(
            [s.m for s in no_margin],
            np.zeros(len(no_margin)),
            "x",
            color="tab:orange",
            label="rejected (no far field)",
        )
    ax.axvspan(result.m_lo, result.m_hi, color="tab:gray", alpha=0.25, label="bracket")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel("mass flux m")
    ax.set_ylabel("subsonic margin M(m)")
    ax.set_title(
        f"critical flux bracket [{result.m_lo:.6g}, {result.m_hi:.6g}]"
    )
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return [_save(fig, out_dir, "margin_curve.png")]
