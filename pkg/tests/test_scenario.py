import json

import numpy as np
import pytest

from desitter import ScenarioError, load_scenario, parse_scenario

MINIMAL = {"ell": 1.0, "initial": {"x": [0, 0, 0, 0], "u": [1, 0, 0, 0]}}


def scenario(**extra):
    data = dict(MINIMAL)
    data.update(extra)
    return parse_scenario(data)


def test_minimal_defaults():
    sc = scenario()
    assert sc.ell == 1.0
    assert sc.mass == 1.0
    assert sc.mode == "intrinsic"
    assert sc.integrator.method == "rk4"
    assert sc.forcing is None
    assert sc.sweep is None
    assert sc.thresholds == {}


def test_chart_initial_derives_bulk():
    sc = scenario()
    st = sc.bulk_state()
    np.testing.assert_allclose(st.X, [0, 0, 0, 0, -1.0])
    np.testing.assert_allclose(st.V, [1, 0, 0, 0, 0])


def test_bulk_initial_derives_chart():
    sc = parse_scenario({"ell": 1.0, "mode": "bulk",
                         "initial": {"X": [0, 0, 0, 0, -1], "V": [1, 0, 0, 0, 0]}})
    st = sc.chart_state()
    np.testing.assert_allclose(st.point.x, 0.0)
    np.testing.assert_allclose(st.u, [1, 0, 0, 0])


def test_rejects_unknown_top_key():
    with pytest.raises(ScenarioError, match="unknown scenario keys"):
        scenario(extra_knob=3)


def test_rejects_non_object():
    with pytest.raises(ScenarioError):
        parse_scenario([1, 2, 3])


@pytest.mark.parametrize("ell", [0, -1, "one", None])
def test_rejects_bad_ell(ell):
    with pytest.raises(ScenarioError, match="ell"):
        parse_scenario({"ell": ell, "initial": MINIMAL["initial"]})


def test_rejects_bad_mass():
    with pytest.raises(ScenarioError, match="mass"):
        scenario(mass=-2.0)


def test_rejects_bad_mode():
    with pytest.raises(ScenarioError, match="mode"):
        scenario(mode="chart")


def test_initial_must_be_single_form():
    bad = [
        {},                                               # nothing
        {"x": [0, 0, 0, 0]},                              # u missing
        {"x": [0, 0, 0, 0], "u": [1, 0, 0, 0], "X": [0, 0, 0, 0, -1]},
        {"x": [0, 0, 0, 0], "u": [1, 0, 0, 0],
         "X": [0, 0, 0, 0, -1], "V": [1, 0, 0, 0, 0]},    # both forms
    ]
    for init in bad:
        with pytest.raises(ScenarioError):
            parse_scenario({"ell": 1.0, "initial": init})


def test_initial_component_counts():
    with pytest.raises(ScenarioError, match="components"):
        parse_scenario({"ell": 1.0,
                        "initial": {"x": [0, 0, 0], "u": [1, 0, 0, 0]}})
    with pytest.raises(ScenarioError, match="finite"):
        parse_scenario({"ell": 1.0,
                        "initial": {"x": [0, 0, 0, float("nan")],
                                    "u": [1, 0, 0, 0]}})


def test_integrator_block():
    sc = scenario(integrator={"method": "dp54", "h": 0.05,
                              "s_span": [0, 2], "abs_tol": 1e-9})
    assert sc.integrator.method == "dp54"
    assert sc.integrator.h == 0.05
    assert sc.integrator.s_span == (0.0, 2.0)


def test_integrator_rejects_unknown_key():
    with pytest.raises(ScenarioError, match="integrator"):
        scenario(integrator={"step": 0.1})


def test_integrator_rejects_bad_span():
    with pytest.raises(ScenarioError, match="s_span"):
        scenario(integrator={"s_span": [0, 1, 2]})
    with pytest.raises(ScenarioError, match="bad integrator config"):
        scenario(integrator={"s_span": [2, 1]})


def test_acceleration_block():
    sc = scenario(acceleration={"rate": 0.5})
    assert sc.forcing.rate == 0.5
    assert sc.forcing.plane == (1, 2)
    sc = scenario(acceleration={"rate": 0.5, "plane": [2, 3]})
    assert sc.forcing.plane == (2, 3)


def test_acceleration_requires_rate_and_intrinsic_mode():
    with pytest.raises(ScenarioError, match="rate"):
        scenario(acceleration={"plane": [1, 2]})
    with pytest.raises(ScenarioError, match="intrinsic"):
        scenario(mode="both", acceleration={"rate": 1.0})
    with pytest.raises(ScenarioError, match="bad acceleration"):
        scenario(acceleration={"rate": 1.0, "plane": [1, 1]})


def test_threshold_validation():
    sc = scenario(thresholds={"norm_drift": 1e-6})
    assert sc.thresholds == {"norm_drift": 1e-6}
    with pytest.raises(ScenarioError, match="positive"):
        scenario(thresholds={"norm_drift": 0})
    with pytest.raises(ScenarioError, match="positive"):
        scenario(thresholds={"norm_drift": "tight"})


def test_sweep_validation():
    sc = scenario(sweep={"parameter": "h", "values": [0.1, 0.05]})
    assert sc.sweep == ("h", [0.1, 0.05])
    with pytest.raises(ScenarioError, match="exactly"):
        scenario(sweep={"parameter": "h"})
    with pytest.raises(ScenarioError, match="parameter"):
        scenario(sweep={"parameter": "mass", "values": [1]})
    with pytest.raises(ScenarioError, match="non-empty"):
        scenario(sweep={"parameter": "h", "values": []})
    with pytest.raises(ScenarioError, match="numbers"):
        scenario(sweep={"parameter": "h", "values": [0.1, "x"]})


def test_load_scenario_roundtrip(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(MINIMAL))
    sc = load_scenario(p)
    assert sc.ell == 1.0


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(p)
