import copy
from pathlib import Path

import numpy as np
import pytest

from adaptive_mpc.scenario import ScenarioError, load_bounds_problem, load_toml, scenario_from_dict, validate_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
BASE = load_toml(SCENARIOS / "siso_laguerre.toml")


def errors_for(mutate, base_dir=SCENARIOS):
    raw = copy.deepcopy(BASE)
    mutate(raw)
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(raw, base_dir)
    return info.value.errors


@pytest.mark.parametrize("name", ["siso_laguerre.toml", "first_order.toml", "zero.toml"])
def test_shipped_scenarios_validate(name):
    sc = validate_scenario(SCENARIOS / name)
    assert sc.T > sc.family.m
    assert sc.reference.shape[0] >= sc.T + sc.controller.N


def test_laguerre_pole_on_unit_circle_names_field():
    errs = errors_for(lambda r: r["basis"].update(a=1.0))
    assert any(e.startswith("basis.a") for e in errs), errs


def test_short_horizon_cites_requirement():
    errs = errors_for(lambda r: r["controller"].update(N=1))
    assert any("N >= m" in e for e in errs), errs


def test_missing_reference_column_named(tmp_path):
    (tmp_path / "ref.csv").write_text("t,wrong\n0,1\n")

    def mutate(r):
        r["reference"] = {"kind": "file", "file": "ref.csv"}

    errs = errors_for(mutate, tmp_path)
    assert any("y_des_1" in e for e in errs), errs


def test_unknown_key_rejected():
    errs = errors_for(lambda r: r["controller"].update(horizon=5))
    assert any("horizon" in e for e in errs), errs


def test_all_errors_collected():
    def mutate(r):
        r["basis"]["a"] = 1.5
        r["controller"]["N"] = 1
        del r["reference"]

    errs = errors_for(mutate)
    assert len(errs) >= 2
    assert any("reference" in e for e in errs)


def test_missing_model_set_file_reported():
    errs = errors_for(lambda r: r.update(model_set={"file": "nowhere.modelset"}))
    assert any("nowhere.modelset" in e for e in errs), errs


def test_unparsable_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("T = = 3\n")
    with pytest.raises(ScenarioError, match="bad.toml"):
        validate_scenario(p)


def test_model_set_file_adds_eta_to_disturbance_bound():
    sc = validate_scenario(SCENARIOS / "first_order.toml")
    raw = load_toml(SCENARIOS / "first_order.toml")
    assert sc.eta_bar is not None
    np.testing.assert_allclose(sc.constraints.eps_d, np.array(raw["constraints"]["eps_d"]) + sc.eta_bar.sum(axis=1))


def test_warmup_is_seeded_and_inside_input_set():
    a, b = validate_scenario(SCENARIOS / "siso_laguerre.toml"), validate_scenario(SCENARIOS / "siso_laguerre.toml")
    np.testing.assert_array_equal(a.past_inputs, b.past_inputs)
    assert a.past_inputs.shape == (10, 1)
    assert np.all(a.constraints.C @ a.past_inputs.T <= a.constraints.g[:, None] + 1e-12)


def test_bounds_problem_parses():
    fam, C, g, grid, channels = load_bounds_problem(SCENARIOS / "first_order_plant.toml")
    assert fam.m == 3 and C.shape == (2, 1)
    assert set(channels) == {(0, 0)}
    assert grid.points_per_dim == 7
