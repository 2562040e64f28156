"""Command line front end: configuration, run orchestration, file output.

Configs are JSON with four required keys (gas, B, nozzle, m) and
optional solver/outputs blocks; dotted --override flags patch single
entries.  Each command writes its delimited data files plus a summary
JSON that is produced even when the run fails, and the exit status
separates verified runs (0) from modified-problem-only runs (2) and
errors (1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import gas as G
from .critical import CriticalSearchError, find_critical
from .elliptic import SolverError, continuation_solve
from .farfield import (
    BernoulliProfile,
    FarFieldError,
    check_assumptions,
    solve_farfield,
)
from .flow import FlowField, diagnostics, mass_flux_error, recover_fields
from .geometry import GeometryError, build_nozzle

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "run",
    "main",
]

FIELD_COLUMNS = "x1,x2,psi,rho,u,v,mach"

SOLVER_DEFAULTS = {
    "n_xi": 401,
    "n_eta": 41,
    "L0": 8.0,
    "L_max": 32.0,
    "tol_nonlinear": 1e-10,
    "tol_farfield": 1e-6,
    "eps0_scale": 0.05,
    "damping": 0.7,
    "max_iter": 200,
    "bc_mode": "linear",
}

OUTPUT_DEFAULTS = {
    "field_csv_path": "field.csv",
    "summary_json_path": "summary.json",
    "margin_csv_path": "margin_curve.csv",
    "profiles_csv_path": "farfield_profiles.csv",
    "gastable_csv_path": "gastable.csv",
    "plots_dir": "auto",
}

CRITICAL_DEFAULTS = {
    "m_start": None,
    "factor": 1.25,
    "tol_m": None,
    "eps_accept_scale": 1e-3,
    "max_expand": 40,
}

VERIFY_DEFAULTS = {"tol": 1e-3, "vorticity_tol": 5e-3}

GASTABLE_DEFAULTS = {"s_min": 0.5, "s_max": 5.0, "n": 91}

_TOP_KEYS = {"gas", "B", "nozzle", "m", "solver", "outputs", "critical", "verify", "gastable"}


class ConfigError(ValueError):
    """Raised for malformed or invalid run configurations."""


@dataclass
class RunConfig:
    """Validated configuration with live model objects."""

    gas: G.GasLaw
    B: BernoulliProfile
    nozzle: object
    m: float
    solver: dict
    outputs: dict
    critical: dict = dc_field(default_factory=dict)
    verify: dict = dc_field(default_factory=dict)
    gastable: dict = dc_field(default_factory=dict)
    raw: dict = dc_field(default_factory=dict)


def _load_raw(source) -> dict:
    if isinstance(source, dict):
        return json.loads(json.dumps(source))
    text = str(source)
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config text is not valid JSON: {e}") from e
    else:
        if not os.path.exists(text):
            raise ConfigError(f"config file not found: {text}")
        with open(text) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{text} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return raw


def apply_overrides(raw: dict, overrides) -> dict:
    """Patch a raw config dict with key.path=value assignments.

    Values parse as JSON when possible and fall back to plain strings,
    so solver.n_xi=201 yields an integer and nozzle.family=straight a
    string.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key.path=value")
        path, text = item.split("=", 1)
        keys = [k for k in path.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override '{item}' has an empty key path")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{path}' descends through a non-object")
        node[keys[-1]] = value
    return raw


def _merge_block(raw: dict, name: str, defaults: dict) -> dict:
    block = raw.get(name, {})
    if not isinstance(block, dict):
        raise ConfigError(f"{name} must be a JSON object")
    for k in block:
        if k not in defaults:
            raise ConfigError(
                f"{name}.{k} is not a recognized setting; known: "
                + ", ".join(sorted(defaults))
            )
    merged = dict(defaults)
    merged.update(block)
    return merged


def _gas_from_config(block) -> G.GasLaw:
    if not isinstance(block, dict):
        raise ConfigError("gas must be an object with a 'model' key")
    model = block.get("model")
    if model == "polytropic":
        A = float(block.get("A", 0.5))
        gamma = float(block.get("gamma", 2.0))
        if A <= 0.0:
            raise ConfigError("gas.A must be positive")
        if gamma <= 1.0:
            raise ConfigError("gas.gamma must exceed 1")
        return G.GasLaw.polytropic(A, gamma)
    if model == "isothermal":
        c = float(block.get("c", 1.0))
        if c <= 0.0:
            raise ConfigError("gas.c must be positive")
        return G.GasLaw.isothermal(c)
    raise ConfigError(
        f"gas.model {model!r} is not supported; known models: polytropic, isothermal"
    )


def _load_table(value, what: str) -> np.ndarray:
    if isinstance(value, str):
        if not os.path.exists(value):
            raise ConfigError(f"{what} table file not found: {value}")
        arr = np.loadtxt(value, delimiter=",", ndmin=2)
    else:
        arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError(f"{what} table must have two columns (position, value)")
    return arr


def _bernoulli_from_config(block) -> BernoulliProfile:
    if not isinstance(block, dict):
        raise ConfigError("B must be an object")
    forms = [k for k in ("constant", "coeffs", "table") if k in block]
    if len(forms) != 1:
        raise ConfigError("B must give exactly one of: constant, coeffs, table")
    kind = forms[0]
    if kind == "constant":
        return BernoulliProfile.constant(float(block["constant"]))
    if kind == "coeffs":
        coeffs = [float(c) for c in block["coeffs"]]
        if not coeffs:
            raise ConfigError("B.coeffs must be a nonempty list")
        return BernoulliProfile.from_coeffs(coeffs)
    arr = _load_table(block["table"], "B")
    return BernoulliProfile.from_table(arr[:, 0], arr[:, 1])


def _nozzle_from_config(block):
    if not isinstance(block, dict):
        raise ConfigError("nozzle must be an object with a 'family' key")
    if "family" not in block:
        raise ConfigError("missing required key 'nozzle.family'")
    params = {k: v for k, v in block.items() if k != "family"}
    if block["family"] == "tabulated":
        for wall in ("lower", "upper"):
            if wall in params:
                params[wall] = _load_table(params[wall], f"nozzle.{wall}")
    try:
        return build_nozzle(block["family"], **params)
    except GeometryError as e:
        raise ConfigError(f"nozzle: {e}") from e
    except TypeError as e:
        raise ConfigError(f"nozzle parameters invalid for {block['family']!r}: {e}") from e


def parse_config(source, overrides=()) -> RunConfig:
    """Load, patch, validate, and materialize a run configuration.

    source is a JSON file path, a JSON text, or an already-parsed dict;
    overrides are key.path=value strings applied before validation.
    """
    raw = apply_overrides(_load_raw(source), overrides)
    for key in ("gas", "B", "nozzle", "m"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(
            "unknown top-level keys: " + ", ".join(sorted(unknown))
        )

    try:
        m = float(raw["m"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"m must be a number, got {raw['m']!r}") from e
    if not m > 0.0:
        raise ConfigError("m must be positive")

    solver = _merge_block(raw, "solver", SOLVER_DEFAULTS)
    for key in ("n_xi", "n_eta"):
        val = solver[key]
        if not float(val).is_integer() or int(val) < 3:
            raise ConfigError(f"solver.{key} must be an integer >= 3")
        solver[key] = int(val)
    for key in ("tol_nonlinear", "tol_farfield", "eps0_scale"):
        if not float(solver[key]) > 0.0:
            raise ConfigError(f"solver.{key} must be positive")
        solver[key] = float(solver[key])
    if not 0.0 < float(solver["damping"]) <= 1.0:
        raise ConfigError("solver.damping must lie in (0, 1]")
    solver["damping"] = float(solver["damping"])
    if not float(solver["L0"]) > 0.0:
        raise ConfigError("solver.L0 must be positive")
    solver["L0"] = float(solver["L0"])
    if not float(solver["L_max"]) >= solver["L0"]:
        raise ConfigError("solver.L_max must be at least solver.L0")
    solver["L_max"] = float(solver["L_max"])
    if int(solver["max_iter"]) < 1:
        raise ConfigError("solver.max_iter must be at least 1")
    solver["max_iter"] = int(solver["max_iter"])
    if solver["bc_mode"] not in ("linear", "farfield_profile"):
        raise ConfigError(
            "solver.bc_mode must be 'linear' or 'farfield_profile'"
        )

    outputs = _merge_block(raw, "outputs", OUTPUT_DEFAULTS)
    critical = _merge_block(raw, "critical", CRITICAL_DEFAULTS)
    verify = _merge_block(raw, "verify", VERIFY_DEFAULTS)
    for key in ("tol", "vorticity_tol"):
        if not float(verify[key]) > 0.0:
            raise ConfigError(f"verify.{key} must be positive")
        verify[key] = float(verify[key])
    gastable = _merge_block(raw, "gastable", GASTABLE_DEFAULTS)
    if int(gastable["n"]) < 2:
        raise ConfigError("gastable.n must be at least 2")

    return RunConfig(
        gas=_gas_from_config(raw["gas"]),
        B=_bernoulli_from_config(raw["B"]),
        nozzle=_nozzle_from_config(raw["nozzle"]),
        m=m,
        solver=solver,
        outputs=outputs,
        critical=critical,
        verify=verify,
        gastable=gastable,
        raw=raw,
    )


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _write_summary(path: str, summary: dict) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _write_csv(path: str, header: str, columns) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float).ravel() for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")


def _farfield_summary(ff) -> dict:
    y_up = np.linspace(0.0, 1.0, 401)
    y_dn = np.linspace(ff.a, ff.b, 401)
    u0 = np.asarray(ff.u0(y_up), dtype=float)
    u1 = np.asarray(ff.u1(y_dn), dtype=float)
    return {
        "rho0": float(ff.rho0),
        "rho1": float(ff.rho1),
        "u0_range": [float(np.min(u0)), float(np.max(u0))],
        "u1_range": [float(np.min(u1)), float(np.max(u1))],
        "choked": bool(ff.choked),
        "warnings": list(ff.warnings),
    }


def column_checks(gas: G.GasLaw, ff, field: FlowField, m: float) -> dict:
    """Diagnostics recomputable from the seven field columns alone.

    Used identically at solve time (on the arrays about to be written)
    and at verify time (on the arrays read back), so a healthy round
    trip reproduces every scalar bit for bit.
    """
    q_sq = field.u**2 + field.v**2
    grad_sq = field.rho**2 * q_sq
    bern = ff.bernoulli(field.psi)
    excess = grad_sq - np.asarray(G.critical_flux(gas, bern)) ** 2
    bern_err = np.abs(G.enthalpy(gas, field.rho) + 0.5 * q_sq - bern)

    # vorticity balance through the chart implied by the node layout
    xi = field.x1[:, 0]
    eta = np.linspace(0.0, 1.0, field.n_eta)
    x2_xi = np.gradient(field.x2, xi, axis=0, edge_order=2)
    x2_eta = np.gradient(field.x2, eta, axis=1, edge_order=2)

    def grad_xy(f):
        f_xi = np.gradient(f, xi, axis=0, edge_order=2)
        f_eta = np.gradient(f, eta, axis=1, edge_order=2)
        return f_xi - f_eta * (x2_xi / x2_eta), f_eta / x2_eta

    v_x, _ = grad_xy(field.v)
    _, u_y = grad_xy(field.u)
    omega = v_x - u_y
    resid = omega / field.rho + np.asarray(ff.source_coeff(field.psi))

    return {
        "mass_flux_max_err": float(mass_flux_error(field, m)),
        "subsonic_margin": float(np.max(excess)),
        "bernoulli_pointwise_max_err": float(np.max(bern_err)),
        "vorticity_sup_residual": float(np.max(np.abs(resid[1:-1, 1:-1]))),
        "psi_min": float(np.min(field.psi)),
        "psi_max": float(np.max(field.psi)),
        "min_u": float(np.min(field.u)),
        "mach_max": float(np.max(field.mach)),
    }


def _plots_directory(outputs: dict, anchor_path: str):
    pdir = outputs.get("plots_dir", "auto")
    if pdir == "none":
        return None
    if pdir == "auto":
        return os.path.dirname(anchor_path) or "."
    return pdir


def _render(summary: dict, renderer, *args) -> None:
    try:
        from . import plots as P

        summary["outputs"]["plots"] = getattr(P, renderer)(*args)
    except Exception as e:  # plotting must never sink a finished run
        summary["outputs"]["plots"] = []
        summary.setdefault("warnings", []).append(f"plotting failed: {e}")


def _run_solve(cfg: RunConfig):
    sv = cfg.solver
    report = check_assumptions(cfg.gas, cfg.B, cfg.m, a=cfg.nozzle.a, b=cfg.nozzle.b)
    ff = solve_farfield(cfg.gas, cfg.B, cfg.m, a=cfg.nozzle.a, b=cfg.nozzle.b)
    cont = continuation_solve(
        cfg.gas,
        ff,
        cfg.nozzle,
        cfg.m,
        n_xi=sv["n_xi"],
        n_eta=sv["n_eta"],
        L0=sv["L0"],
        L_max=sv["L_max"],
        bc_mode=sv["bc_mode"],
        eps0_scale=sv["eps0_scale"],
        damping=sv["damping"],
        tol_nonlinear=sv["tol_nonlinear"],
        tol_farfield=sv["tol_farfield"],
        max_iter=sv["max_iter"],
    )
    res = cont.result
    diag = diagnostics(cfg.gas, ff, res)

    field = None
    if diag["subsonic_margin"] < 0.0:
        field = recover_fields(cfg.gas, ff, res.mesh, res.psi)

    csv_path = cfg.outputs["field_csv_path"]
    mesh = res.mesh
    if field is not None:
        cols = [field.x1, field.x2, field.psi, field.rho, field.u, field.v, field.mach]
    else:
        nanbed = np.full_like(res.psi, np.nan)
        cols = [mesh.x1, mesh.x2, res.psi, nanbed, nanbed, nanbed, nanbed]
    _write_csv(csv_path, FIELD_COLUMNS, cols)

    summary = {
        "status": "ok",
        "admissibility": report.as_dict(),
        "farfield": _farfield_summary(ff),
        "solver": {
            "L": cont.L,
            "levels": cont.levels,
            "iterations": res.iterations,
            "converged": res.converged,
            "final_increment": float(res.increments[-1]) if len(res.increments) else 0.0,
            "truncation_active": res.truncation_active,
            "truncation_fraction": res.truncation_fraction,
            "subsonic_margin": res.subsonic_margin,
            "ellipticity": list(res.ellipticity),
            "damping_final": res.damping_final,
            "eps": res.eps,
            "n_xi": sv["n_xi"],
            "n_eta": sv["n_eta"],
        },
        "diagnostics": diag,
        "csv_checks": None
        if field is None
        else column_checks(cfg.gas, ff, field, cfg.m),
        "euler_consistent": diag["euler_consistent"],
        "outputs": {"field_csv": csv_path, "plots": []},
    }
    pdir = _plots_directory(cfg.outputs, csv_path)
    if pdir is not None:
        _render(summary, "render_solve", field, res, cont, ff, pdir)
    return (0 if diag["euler_consistent"] else 2), summary


def _run_farfield(cfg: RunConfig):
    report = check_assumptions(cfg.gas, cfg.B, cfg.m, a=cfg.nozzle.a, b=cfg.nozzle.b)
    ff = solve_farfield(cfg.gas, cfg.B, cfg.m, a=cfg.nozzle.a, b=cfg.nozzle.b)
    y_up = np.linspace(0.0, 1.0, 401)
    y_dn = np.linspace(ff.a, ff.b, 401)
    csv_path = cfg.outputs["profiles_csv_path"]
    _write_csv(
        csv_path,
        "x2_up,psi_up,u_up,x2_down,psi_down,u_down",
        [
            y_up,
            ff.psi_upstream(y_up),
            ff.u0(y_up),
            y_dn,
            ff.psi_downstream(y_dn),
            ff.u1(y_dn),
        ],
    )
    summary = {
        "status": "ok",
        "admissibility": report.as_dict(),
        "farfield": _farfield_summary(ff),
        "outputs": {"profiles_csv": csv_path, "plots": []},
    }
    pdir = _plots_directory(cfg.outputs, csv_path)
    if pdir is not None:
        _render(summary, "render_farfield", ff, pdir)
    return 0, summary


def _run_critical(cfg: RunConfig):
    sv = cfg.solver
    cr = cfg.critical
    probe_kw = {
        "n_xi": sv["n_xi"],
        "n_eta": sv["n_eta"],
        "L0": sv["L0"],
        "L_max": sv["L_max"],
        "bc_mode": sv["bc_mode"],
        "damping": sv["damping"],
        "tol_nonlinear": sv["tol_nonlinear"],
        "tol_farfield": sv["tol_farfield"],
        "max_iter": sv["max_iter"],
    }
    # the probe's cutoff width stays at its own tight default unless the
    # config pins one explicitly; the wide solve default would park the
    # accept/reject frontier at the truncation onset instead of the
    # choking threshold
    if "eps0_scale" in cfg.raw.get("solver", {}):
        probe_kw["eps0_scale"] = sv["eps0_scale"]
    result = find_critical(
        cfg.gas,
        cfg.B,
        cfg.nozzle,
        m_start=cr["m_start"] if cr["m_start"] is not None else cfg.m,
        factor=float(cr["factor"]),
        tol_m=cr["tol_m"],
        eps_accept_scale=float(cr["eps_accept_scale"]),
        max_expand=int(cr["max_expand"]),
        **probe_kw,
    )
    csv_path = cfg.outputs["margin_csv_path"]
    order = np.argsort([s.m for s in result.samples])
    samples = [result.samples[i] for i in order]
    _write_csv(
        csv_path,
        "m,M,converged,truncation_active",
        [
            [s.m for s in samples],
            [np.nan if s.margin is None else s.margin for s in samples],
            [np.nan if s.converged is None else float(s.converged) for s in samples],
            [
                np.nan if s.truncation_active is None else float(s.truncation_active)
                for s in samples
            ],
        ],
    )
    summary = {
        "status": "ok",
        "bracket": {
            "m_lo": result.m_lo,
            "m_hi": result.m_hi,
            "m_hat": result.m_hat,
            "width": result.width,
            "tol_m": result.tol,
            "eps_accept": result.eps_accept,
        },
        "samples": [
            {
                "m": s.m,
                "accepted": s.accepted,
                "reason": s.reason,
                "margin": s.margin,
                "converged": s.converged,
                "truncation_active": s.truncation_active,
                "detail": s.detail,
            }
            for s in samples
        ],
        "outputs": {"margin_csv": csv_path, "plots": []},
    }
    pdir = _plots_directory(cfg.outputs, csv_path)
    if pdir is not None:
        _render(summary, "render_critical", result, pdir)
    return 0, summary


def _run_verify(cfg: RunConfig):
    csv_path = cfg.outputs["field_csv_path"]
    if not os.path.exists(csv_path):
        raise ConfigError(f"field CSV not found: {csv_path}")
    with open(csv_path) as fh:
        header = fh.readline().strip()
    if header != FIELD_COLUMNS:
        raise ConfigError(
            f"field CSV header is {header!r}; expected {FIELD_COLUMNS!r}"
        )
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    n_xi, n_eta = cfg.solver["n_xi"], cfg.solver["n_eta"]
    if data.shape[0] != n_xi * n_eta:
        raise ConfigError(
            f"field CSV has {data.shape[0]} rows; solver grid is "
            f"{n_xi} x {n_eta} = {n_xi * n_eta}"
        )
    names = FIELD_COLUMNS.split(",")
    field = FlowField.from_columns(
        {k: data[:, i] for i, k in enumerate(names)}, n_xi, n_eta
    )
    if not np.all(np.isfinite(data)):
        return 2, {
            "status": "ok",
            "checks": None,
            "violations": ["field columns contain non-finite entries"],
            "euler_consistent": False,
            "outputs": {},
        }

    ff = solve_farfield(cfg.gas, cfg.B, cfg.m, a=cfg.nozzle.a, b=cfg.nozzle.b)
    checks = column_checks(cfg.gas, ff, field, cfg.m)
    tol = cfg.verify["tol"]
    violations = []
    if checks["mass_flux_max_err"] > tol:
        violations.append(
            f"mass-flux violation: max section error {checks['mass_flux_max_err']:.6g} "
            f"exceeds {tol:g}"
        )
    if checks["bernoulli_pointwise_max_err"] > tol:
        violations.append(
            f"Bernoulli violation: pointwise error {checks['bernoulli_pointwise_max_err']:.6g} "
            f"exceeds {tol:g}"
        )
    if checks["vorticity_sup_residual"] > cfg.verify["vorticity_tol"]:
        violations.append(
            f"vorticity violation: residual {checks['vorticity_sup_residual']:.6g} "
            f"exceeds {cfg.verify['vorticity_tol']:g}"
        )
    if not checks["subsonic_margin"] < 0.0:
        violations.append(
            f"subsonic margin {checks['subsonic_margin']:.6g} is not negative"
        )
    if not (
        checks["psi_min"] >= -1e-8 * cfg.m
        and checks["psi_max"] <= cfg.m * (1.0 + 1e-8)
    ):
        violations.append("psi leaves the [0, m] range")
    if not checks["min_u"] > 0.0:
        violations.append(f"min horizontal velocity {checks['min_u']:.6g} is not positive")
    summary = {
        "status": "ok",
        "checks": checks,
        "violations": violations,
        "verify_tol": tol,
        "euler_consistent": not violations,
        "outputs": {},
    }
    return (0 if not violations else 2), summary


def _run_gastable(cfg: RunConfig):
    gt = cfg.gastable
    s = np.linspace(float(gt["s_min"]), float(gt["s_max"]), int(gt["n"]))
    states = [G.critical_state(cfg.gas, float(v)) for v in s]
    csv_path = cfg.outputs["gastable_csv_path"]
    _write_csv(
        csv_path,
        "s,rho_max,rho_crit,critical_speed,critical_flux",
        [
            s,
            [st.rho_max for st in states],
            [st.rho_crit for st in states],
            [st.speed for st in states],
            [st.flux for st in states],
        ],
    )
    return 0, {
        "status": "ok",
        "rows": int(len(s)),
        "outputs": {"gastable_csv": csv_path, "plots": []},
    }


_RUNNERS = {
    "solve": _run_solve,
    "farfield": _run_farfield,
    "critical": _run_critical,
    "verify": _run_verify,
    "gastable": _run_gastable,
}


def run(command: str, cfg: RunConfig):
    """Execute one command; always writes the summary JSON.

    Returns (exit_status, summary).  Module errors land in the summary
    under "failure" with exit status 1 rather than escaping.
    """
    if command not in _RUNNERS:
        raise ConfigError(
            f"unknown command {command!r}; known: " + ", ".join(sorted(_RUNNERS))
        )
    t0 = time.time()
    try:
        code, summary = _RUNNERS[command](cfg)
    except (
        ConfigError,
        FarFieldError,
        GeometryError,
        SolverError,
        CriticalSearchError,
        G.GasDomainError,
        OSError,
        ValueError,
    ) as e:
        code = 1
        summary = {
            "status": "failed",
            "failure": f"{type(e).__name__}: {e}",
            "outputs": {},
        }
    summary["command"] = command
    summary["config"] = cfg.raw
    summary["elapsed_seconds"] = round(time.time() - t0, 3)
    summary["exit_status"] = code
    _write_summary(cfg.outputs["summary_json_path"], summary)
    return code, summary


def _describe(command: str, code: int, summary: dict) -> str:
    if summary.get("status") == "failed":
        return f"{command}: failed ({summary['failure']})"
    if command == "solve":
        d = summary["diagnostics"]
        margin = d["subsonic_margin"]
        return (
            f"solve: {'euler-consistent' if summary['euler_consistent'] else 'modified-problem-only'}"
            f" margin={margin:.6g} L={summary['solver']['L']:g}"
            f" iterations={summary['solver']['iterations']}"
        )
    if command == "farfield":
        f = summary["farfield"]
        return f"farfield: rho0={f['rho0']:.10g} rho1={f['rho1']:.10g}"
    if command == "critical":
        b = summary["bracket"]
        return (
            f"critical: bracket [{b['m_lo']:.10g}, {b['m_hi']:.10g}]"
            f" width={b['width']:.4g}"
        )
    if command == "verify":
        n = len(summary["violations"])
        return f"verify: {'clean' if n == 0 else f'{n} violation(s)'}"
    return f"gastable: {summary['rows']} rows"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nozzleflow",
        description="Steady subsonic nozzle flow: solve, far-field states, "
        "critical mass flux, verification, gas tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve", "run the full pipeline and write field CSV + summary JSON"),
        ("farfield", "compute upstream/downstream states and profiles CSV"),
        ("critical", "bracket the critical mass flux, write margin-curve CSV"),
        ("verify", "re-run diagnostics on an existing field CSV"),
        ("gastable", "tabulate gas critical quantities over a range"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config path or text")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="patch one config entry (repeatable)",
        )
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.override)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    code, summary = run(args.command, cfg)
    print(_describe(args.command, code, summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
