import json
import os
from pathlib import Path

import numpy as np
import pytest

from floqcd.cli import main
from floqcd.config import ConfigError, bundled_config, load_config, parse_config

MINIMAL_LANDSCAPE = """
seed = 7

[model]
kind = "two_qubit"

[schedule]
kind = "smooth"
tau = 0.1

[landscape]
arm = "optimized_anneal"
lo = 0.0
hi = 0.3
points = 4

[propagator]
rel_tol = 1e-8
abs_tol = 1e-10
"""


def test_missing_config_exits_2(tmp_path):
    code = main(["state-prep", "--config", str(tmp_path / "nope.toml"),
                 "--out-dir", str(tmp_path / "out")])
    assert code == 2
    assert not (tmp_path / "out").exists()


def test_unknown_key_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\nkind = 'two_qubit'\nmystery = 3\n")
    code = main(["state-prep", "--config", str(bad),
                 "--out-dir", str(tmp_path / "out")])
    assert code == 2


def test_bad_arm_override_exits_2(tmp_path):
    code = main(["exact-cd", "--arm", "nonsense", "--out-dir", str(tmp_path / "o")])
    assert code == 2


def test_parse_rejects_wrong_types():
    with pytest.raises(ConfigError):
        parse_config({"seed": "high"})
    with pytest.raises(ConfigError):
        parse_config({"schedule": {"kind": "smooth", "tau": "slow"}})
    with pytest.raises(ConfigError):
        parse_config({"drive": {"bounds": [2.0, 1.0]}})


def test_bundled_configs_parse():
    for name in ["state_prep", "ising", "learn_agp", "landscape_beta",
                 "landscape_gamma", "exact_cd"]:
        cfg, raw = bundled_config(name)
        assert raw.startswith(b"#")
    with pytest.raises(ConfigError):
        bundled_config("not_a_config")


def test_exact_cd_end_to_end(tmp_path):
    out = tmp_path / "run"
    code = main(["exact-cd", "--out-dir", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == 1
    assert report["results"]["final_infidelity"] <= 1e-8
    assert "config_echo" in report
    # trajectory CSV with the documented column order
    header = (out / "exact_cd_trajectory.csv").read_text().splitlines()[0]
    assert header == "t,lambda,fidelity_instantaneous,energy,norm_drift"
    manifest = json.loads((out / "manifest.json").read_text())
    names = {entry["path"] for entry in manifest["outputs"]}
    assert {"report.json", "exact_cd_trajectory.csv", "exact_cd.png"} <= names


def test_landscape_single_point_equals_direct(tmp_path):
    cfg_file = tmp_path / "scan.toml"
    cfg_file.write_text(MINIMAL_LANDSCAPE.replace("points = 4", "points = 1"))
    out = tmp_path / "out"
    code = main(["landscape", "--config", str(cfg_file), "--out-dir", str(out),
                 "--no-plots"])
    assert code == 0
    rows = (out / "landscape.csv").read_text().splitlines()
    assert rows[0] == "param,cost"
    param, cost = map(float, rows[1].split(","))
    assert param == 0.0

    # direct evaluation oracle: gamma = 0 is the unassisted protocol
    from floqcd.models import two_qubit_model, TwoQubitParams
    from floqcd.operators import ground_state
    from floqcd.dynamics import plan_bare, propagate, PropagatorConfig
    from floqcd.schedules import Schedule
    model = two_qubit_model(TwoQubitParams())
    _, psi0 = ground_state(model.hamiltonian(0.0))
    _, bell = ground_state(model.hamiltonian(1.0))
    psi = propagate(plan_bare(model, Schedule("smooth", 0.1)), psi0, (0.0, 0.1),
                    PropagatorConfig(rel_tol=1e-8, abs_tol=1e-10))
    direct = 1.0 - abs(np.vdot(bell, psi)) ** 2
    assert cost == pytest.approx(direct, abs=1e-12)


def test_landscape_rerun_identical(tmp_path):
    cfg_file = tmp_path / "scan.toml"
    cfg_file.write_text(MINIMAL_LANDSCAPE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["landscape", "--config", str(cfg_file), "--out-dir", str(out1),
                 "--no-plots"]) == 0
    assert main(["landscape", "--config", str(cfg_file), "--out-dir", str(out2),
                 "--no-plots", "--jobs", "2"]) == 0
    assert (out1 / "landscape.csv").read_bytes() == (out2 / "landscape.csv").read_bytes()
    r1 = json.loads((out1 / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    assert r1["results"] == r2["results"]


def test_out_dir_env_var(tmp_path, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("FLOQCD_OUT_DIR", str(target))
    cfg_file = tmp_path / "scan.toml"
    cfg_file.write_text(MINIMAL_LANDSCAPE.replace("points = 4", "points = 1"))
    assert main(["landscape", "--config", str(cfg_file), "--no-plots"]) == 0
    assert (target / "landscape.csv").exists()


def test_seed_override_recorded(tmp_path):
    cfg_file = tmp_path / "scan.toml"
    cfg_file.write_text(MINIMAL_LANDSCAPE.replace("points = 4", "points = 1"))
    out = tmp_path / "out"
    assert main(["landscape", "--config", str(cfg_file), "--out-dir", str(out),
                 "--seed", "99", "--no-plots"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["seed"] == 99
