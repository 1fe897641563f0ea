import json

import numpy as np
import pytest

from jumpmfg.cli import main
from jumpmfg.config import ConfigError, ScenarioConfig, bundled_scenarios, load_scenario


def test_bundled_scenarios_load():
    assert {"default", "decoupled"} <= set(bundled_scenarios())
    assert load_scenario("decoupled.cfg") == load_scenario("decoupled")


def test_ini_round_trip_and_hash(default_scenario):
    again = ScenarioConfig.from_ini(default_scenario.to_ini())
    assert again == default_scenario
    assert again.hash == default_scenario.hash
    assert again.to_ini() == default_scenario.to_ini()


def test_overrides_change_hash(default_scenario):
    other = default_scenario.with_overrides(["simulation.seed=9", "experiments.nash_N=5,10,20,40"])
    assert other.values["simulation"]["seed"] == 9
    assert other.experiments["nash_N"] == (5, 10, 20, 40)
    assert other.hash != default_scenario.hash
    assert ScenarioConfig.from_ini(other.to_ini()) == other


def test_file_round_trip(tmp_path, default_scenario):
    p = tmp_path / "s.cfg"
    p.write_text(default_scenario.with_overrides({"kernel.mean_pull": 0.2}).to_ini())
    assert load_scenario(str(p)).kernel.mean_pull == 0.2


@pytest.mark.parametrize("override,field", [
    ("costs.control_curvature=0", "costs.control_curvature"),
    ("kernel.base_rate=-1", "kernel.base_rate"),
    ("controls.u_min=2", "u_min"),
    ("time.steps=5", "time.steps"),
    ("time.steps=10;kernel.base_rate=5", "time.steps"),
    ("initial.kind=cauchy", "initial.kind"),
    ("kernel.colour=red", "kernel.colour"),
    ("costs.reward_slope=abc", "costs.reward_slope"),
])
def test_validation_names_field(default_scenario, override, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        default_scenario.with_overrides(override.split(";"))


def test_unknown_scenario():
    with pytest.raises(ConfigError, match="no such file"):
        load_scenario("nowhere")


def test_initial_measures(default_scenario):
    for kind in ("gaussian", "uniform", "point"):
        mu = default_scenario.with_overrides([f"initial.kind={kind}"]).initial_measure()
        assert mu.mass == pytest.approx(1.0, abs=1e-12)
    point = default_scenario.with_overrides(["initial.kind=point"]).initial_measure()
    assert point.weights[30] == 1.0


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out-dir", str(out)])
    return code, out


def test_kinetic_command_writes_curve_and_manifest(tmp_path):
    code, out = _run(tmp_path, "run", "kinetic", "default.cfg")
    assert code == 0
    assert (out / "curve.csv").read_text().startswith("time,node_index,weight\n")
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "kinetic" and man["outputs"] == ["curve.csv"]
    assert man["config_hash"] == load_scenario("default").hash
    assert {"numpy", "scipy", "jumpmfg"} <= set(man["versions"])
    assert ScenarioConfig.from_file(out / "scenario.cfg") == load_scenario("default")


def test_equilibrium_command_on_decoupled(tmp_path):
    code, out = _run(tmp_path, "equilibrium", "decoupled")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["result"]["iterations"] <= 2 and man["result"]["converged"]


def test_non_convergence_exit_code(tmp_path, capsys):
    code, out = _run(tmp_path, "equilibrium", "--set", "fixed_point.max_iters=2", "--set", "fixed_point.tol=1e-12")
    assert code == 3
    assert "residual" in capsys.readouterr().err
    assert (out / "history.csv").exists()


def test_invalid_config_exit_code(tmp_path, capsys):
    code, out = _run(tmp_path, "kinetic", "--set", "costs.control_curvature=-1")
    assert code == 2
    assert "costs.control_curvature" in capsys.readouterr().err
    assert not out.exists()


def test_hypcheck_and_hjb_commands(tmp_path):
    code, out = _run(tmp_path, "hypcheck")
    assert code == 0 and "check:curvature_bound,1" in (out / "hypothesis.csv").read_text()
    code, out = _run(tmp_path, "hjb", "--control", "0.2")
    assert code == 0 and (out / "value.csv").read_text().startswith("time,node_index,W,gamma\n")
    code, _ = _run(tmp_path, "hjb", "--control", "3")
    assert code == 2


def test_simulate_command(tmp_path):
    code, out = _run(tmp_path, "simulate", "decoupled", "--N", "5", "--reps", "4", "--seed", "3")
    assert code == 0
    assert len((out / "payoffs.csv").read_text().splitlines()) == 5
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3


def test_mollify_check_command(tmp_path):
    code, out = _run(tmp_path, "mollify-check")
    assert code == 0
    rows = (out / "bounds.csv").read_text().splitlines()
    assert rows[0] == "bound_name,lhs,rhs,margin" and len(rows) == 61


def test_nash_gap_outputs_are_reproducible(tmp_path, monkeypatch):
    args = ["nash-gap", "default.cfg", "--N", "10,20,40,80", "--seed", "7", "--reps", "40"]
    code1 = main([*args, "--out-dir", str(tmp_path / "a"), "--workers", "1"])
    monkeypatch.setenv("JUMPMFG_WORKERS", "2")
    code2 = main([*args, "--out-dir", str(tmp_path / "b")])
    assert code1 == code2 == 0
    for name in ("results.csv", "deviations.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["workers"] == 2


def test_functional_gap_command(tmp_path):
    code, out = _run(tmp_path, "functional-gap", "--N", "10,20,40,80", "--reps", "50",
                     "--set", "experiments.functional_max_reps=50")
    assert code == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 5
    slope = float(lines[1].split(",")[4])
    assert np.isfinite(slope) or np.isnan(slope)
