"""Tests for config parsing, the command runners, and file round trips."""

import json

import numpy as np
import pytest

from nozzleflow.cli import (
    ConfigError,
    FIELD_COLUMNS,
    apply_overrides,
    main,
    parse_config,
    run,
)
from nozzleflow.gas import GasLaw, critical_flux

M_UNIFORM = 1.25 / np.sqrt(2.0)


def config_dict(tmp_path, **patch):
    cfg = {
        "gas": {"model": "polytropic"},
        "B": {"constant": 1.5},
        "nozzle": {"family": "straight"},
        "m": M_UNIFORM,
        "solver": {"n_xi": 81, "n_eta": 11},
        "outputs": {
            "field_csv_path": str(tmp_path / "field.csv"),
            "summary_json_path": str(tmp_path / "summary.json"),
            "margin_csv_path": str(tmp_path / "margin.csv"),
            "profiles_csv_path": str(tmp_path / "profiles.csv"),
            "gastable_csv_path": str(tmp_path / "gastable.csv"),
            "plots_dir": "none",
        },
    }
    for key, value in patch.items():
        if key in ("solver", "outputs", "critical", "verify", "gastable") and isinstance(
            value, dict
        ):
            cfg.setdefault(key, {}).update(value)
        else:
            cfg[key] = value
    return cfg


def test_defaults_filled(tmp_path):
    cfg = parse_config({"gas": {"model": "polytropic"}, "B": {"constant": 1.5},
                        "nozzle": {"family": "straight"}, "m": 0.5})
    assert cfg.solver["n_xi"] == 401
    assert cfg.solver["n_eta"] == 41
    assert cfg.solver["L0"] == 8.0
    assert cfg.solver["L_max"] == 32.0
    assert cfg.solver["tol_nonlinear"] == 1e-10
    assert cfg.solver["tol_farfield"] == 1e-6
    assert cfg.solver["eps0_scale"] == 0.05
    assert cfg.solver["damping"] == 0.7
    assert cfg.m == 0.5
    assert cfg.gas.A == 0.5 and cfg.gas.gamma == 2.0
    assert cfg.B(0.3) == 1.5
    assert cfg.nozzle.family == "straight"


def test_parse_errors():
    base = {"gas": {"model": "polytropic"}, "B": {"constant": 1.5},
            "nozzle": {"family": "straight"}, "m": 0.5}
    for key in ("gas", "B", "nozzle", "m"):
        broken = {k: v for k, v in base.items() if k != key}
        with pytest.raises(ConfigError, match=f"missing required key '{key}'"):
            parse_config(broken)
    with pytest.raises(ConfigError, match="m must be positive"):
        parse_config({**base, "m": -1})
    with pytest.raises(ConfigError, match="supported"):
        parse_config({**base, "nozzle": {"family": "venturi"}})
    with pytest.raises(ConfigError, match="solver.n_xi"):
        parse_config({**base, "solver": {"n_xi": 2}})
    with pytest.raises(ConfigError, match="not a recognized setting"):
        parse_config({**base, "solver": {"nxi": 101}})
    with pytest.raises(ConfigError, match="gas.model"):
        parse_config({**base, "gas": {"model": "van-der-waals"}})
    with pytest.raises(ConfigError, match="exactly one of"):
        parse_config({**base, "B": {"constant": 1.5, "coeffs": [1.5]}})
    with pytest.raises(ConfigError, match="config file not found"):
        parse_config("/no/such/config.json")


def test_overrides_parse_types():
    raw = {"m": 0.5, "solver": {}}
    apply_overrides(raw, ["solver.n_xi=201", "m=0.6", "nozzle.family=straight",
                          "solver.bc_mode=farfield_profile"])
    assert raw["solver"]["n_xi"] == 201
    assert raw["m"] == 0.6
    assert raw["nozzle"]["family"] == "straight"
    assert raw["solver"]["bc_mode"] == "farfield_profile"
    with pytest.raises(ConfigError, match="key.path=value"):
        apply_overrides(raw, ["solver.n_xi"])


def test_bernoulli_forms(tmp_path):
    cfg = parse_config(config_dict(tmp_path, B={"coeffs": [1.5025, -0.01, 0.01]}))
    assert cfg.B(0.5) == pytest.approx(1.5, abs=1e-15)
    table = [[0.0, 1.5], [0.5, 1.52], [1.0, 1.5]]
    cfg = parse_config(config_dict(tmp_path, B={"table": table}))
    assert cfg.B(0.5) == pytest.approx(1.52, abs=1e-12)


def test_solve_verify_round_trip(tmp_path):
    cfg = parse_config(config_dict(tmp_path))
    code, summary = run("solve", cfg)
    assert code == 0
    assert summary["euler_consistent"] is True
    assert summary["diagnostics"]["mass_flux_max_err"] < 1e-10
    with open(tmp_path / "field.csv") as fh:
        assert fh.readline().strip() == FIELD_COLUMNS
    saved = json.loads((tmp_path / "summary.json").read_text())
    assert saved["command"] == "solve"
    assert saved["exit_status"] == 0

    code2, verify_summary = run("verify", cfg)
    assert code2 == 0
    assert verify_summary["violations"] == []
    # identical scalars bit for bit through the 17-digit CSV round trip
    assert verify_summary["checks"] == summary["csv_checks"]


def test_verify_detects_scaled_velocity(tmp_path):
    cfg = parse_config(config_dict(tmp_path))
    assert run("solve", cfg)[0] == 0
    path = tmp_path / "field.csv"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    data[:, 4] *= 1.1
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header=FIELD_COLUMNS, comments="")
    code, summary = run("verify", cfg)
    assert code == 2
    assert any("mass-flux violation" in v for v in summary["violations"])


def test_verify_row_count_mismatch(tmp_path):
    cfg = parse_config(config_dict(tmp_path))
    assert run("solve", cfg)[0] == 0
    cfg2 = parse_config(config_dict(tmp_path, solver={"n_xi": 61, "n_eta": 11}))
    code, summary = run("verify", cfg2)
    assert code == 1
    assert "rows" in summary["failure"]


def test_critical_command(tmp_path):
    cfg = parse_config(config_dict(tmp_path, m=0.5))
    code, summary = run("critical", cfg)
    assert code == 0
    b = summary["bracket"]
    assert b["m_lo"] <= 1.0 <= b["m_hi"]
    assert b["width"] <= 0.02
    with open(tmp_path / "margin.csv") as fh:
        assert fh.readline().strip() == "m,M,converged,truncation_active"
    curve = np.loadtxt(tmp_path / "margin.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(curve[:, 0]) > 0)
    feasible = curve[np.isfinite(curve[:, 1])]
    assert np.all(feasible[:, 1] < 0.0)


def test_farfield_command(tmp_path):
    cfg = parse_config(config_dict(tmp_path))
    code, summary = run("farfield", cfg)
    assert code == 0
    assert summary["farfield"]["rho0"] == pytest.approx(1.25, abs=1e-10)
    prof = np.loadtxt(tmp_path / "profiles.csv", delimiter=",", skiprows=1)
    assert prof.shape == (401, 6)
    assert prof[-1, 1] == pytest.approx(cfg.m, abs=1e-9)  # psi_up(1) = m


def test_gastable_command(tmp_path):
    cfg = parse_config(config_dict(tmp_path, gastable={"s_min": 1.0, "s_max": 2.0, "n": 11}))
    code, summary = run("gastable", cfg)
    assert code == 0
    table = np.loadtxt(tmp_path / "gastable.csv", delimiter=",", skiprows=1)
    assert table.shape == (11, 5)
    sigma = critical_flux(GasLaw.polytropic(0.5, 2.0), table[:, 0])
    assert np.max(np.abs(table[:, 4] - sigma)) < 1e-14


def test_infeasible_flux_fails_with_summary(tmp_path):
    cfg = parse_config(config_dict(tmp_path, m=1.4))
    code, summary = run("solve", cfg)
    assert code == 1
    assert summary["status"] == "failed"
    assert "exceeds" in summary["failure"]
    saved = json.loads((tmp_path / "summary.json").read_text())
    assert saved["status"] == "failed"
    assert saved["exit_status"] == 1


def test_truncated_run_exits_two(tmp_path):
    cfg = parse_config(config_dict(
        tmp_path,
        m=0.8,
        nozzle={"family": "bump", "amplitude": 0.3, "width": 1.0, "wall": "lower"},
        solver={"n_xi": 81, "n_eta": 11, "L_max": 8.0},
    ))
    code, summary = run("solve", cfg)
    assert code == 2
    assert summary["euler_consistent"] is False
    assert summary["solver"]["truncation_active"] is True
    assert summary["csv_checks"] is None
    data = np.loadtxt(tmp_path / "field.csv", delimiter=",", skiprows=1)
    assert np.all(np.isnan(data[:, 3:]))
    assert np.all(np.isfinite(data[:, :3]))
    code2, vsummary = run("verify", cfg)
    assert code2 == 2
    assert any("non-finite" in v for v in vsummary["violations"])


def test_plots_rendered_alongside_output(tmp_path):
    cfg = parse_config(config_dict(tmp_path, outputs={"plots_dir": "auto"}))
    code, summary = run("solve", cfg)
    assert code == 0
    plots = summary["outputs"]["plots"]
    assert len(plots) == 3
    for p in plots:
        assert (tmp_path / p.split("/")[-1]).exists()


def test_main_entry(tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(config_dict(tmp_path)))
    code = main(["solve", "--config", str(cfg_path),
                 "--override", "solver.n_xi=61"])
    assert code == 0
    out = capsys.readouterr().out
    assert "euler-consistent" in out
    data = np.loadtxt(tmp_path / "field.csv", delimiter=",", skiprows=1)
    assert data.shape[0] == 61 * 11
    assert main(["solve", "--config", "/no/such.json"]) == 1
    assert "config error" in capsys.readouterr().err
