import json

import pytest

from cpessim import presets
from cpessim.scenario import (ScenarioError, load_scenario, scenario_from_dict,
                              scenario_hash)


def minimal_doc(**overrides):
    doc = {
        "schema_version": 1,
        "meta": {"name": "tiny", "horizon": 0.1, "dt_phys": 0.001},
        "grid": {
            "f_nom": 60.0,
            "machines": [{"id": "m1", "inertia_const": 5.0, "p_mech": 0.5}],
            "loads": [{"id": "lA", "demand": 0.5}],
        },
        "attacks": [],
        "metrics": [],
        "seed": 1,
    }
    doc.update(overrides)
    return doc


def test_all_preset_docs_parse_and_validate():
    for name in presets.PRESET_NAMES:
        sc = presets.preset_scenario(name)
        assert sc.horizon > 0
        assert sc.seed != 0
        assert sc.threat is not None
        assert sc.risk_inputs is not None


def test_all_preset_variants_parse():
    for variant in ("a", "b", "c", "d"):
        presets.preset_scenario("case2_load", variant)
    for variant in ("delay_0", "delay_0_5", "delay_5", "delay_15"):
        presets.preset_scenario("case3_tda", variant)
    for variant in ("breaker_open", "breaker_open_close", "breaker_triple",
                    "n1", "n11", "n2"):
        presets.preset_scenario("case4_td", variant)


def test_unknown_preset_and_variant():
    with pytest.raises(KeyError):
        presets.preset_doc("case9")
    with pytest.raises(ValueError):
        presets.preset_doc("case2_load", "z")


def test_minimal_doc_parses():
    sc = scenario_from_dict(minimal_doc())
    assert sc.name == "tiny"
    grid = sc.build_grid()
    assert grid.machines[0].id == "m1"


def test_schema_version_checked():
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(minimal_doc(schema_version=2))
    assert "schema_version" in str(err.value)


def test_missing_horizon_names_field():
    doc = minimal_doc()
    del doc["meta"]["horizon"]
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "meta.horizon" in str(err.value)


def test_negative_dt_names_field():
    doc = minimal_doc()
    doc["meta"]["dt_phys"] = -1.0
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "meta.dt_phys" in str(err.value)


def test_bad_load_demand_names_field():
    doc = minimal_doc()
    doc["grid"]["loads"][0]["demand"] = -5.0
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "grid.loads[0]" in str(err.value)


def test_unknown_attack_type():
    doc = minimal_doc(attacks=[{"type": "wormhole"}])
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "attacks[0].type" in str(err.value)


def test_load_change_target_must_resolve():
    doc = minimal_doc(attacks=[{"type": "load_change", "targets": ["nope"],
                                "delta": 0.5, "window": [[0.0, 0.05]]}])
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "attacks[0].targets" in str(err.value)


def test_link_attack_requires_network():
    doc = minimal_doc(attacks=[{"type": "dos", "tap": "link:l1",
                                "window": [[0.0, 0.05]]}])
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "tap" in str(err.value)


def test_dia_tap_must_name_plant():
    doc = minimal_doc(attacks=[{"type": "dia", "tap": "meas:ghost", "beta": 0.5,
                                "window": [[0.0, 0.05]]}])
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "meas" in str(err.value)


def test_kw_unit_conversion():
    doc = minimal_doc()
    doc["grid"]["unit"] = "kW"
    doc["grid"]["s_base_kw"] = 1000.0
    doc["grid"]["loads"][0]["demand"] = 300.0
    grid = scenario_from_dict(doc).build_grid()
    assert grid.loads[0].base_demand == pytest.approx(0.3)


def test_bad_unit_rejected():
    doc = minimal_doc()
    doc["grid"]["unit"] = "MW"
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "grid.unit" in str(err.value)


def test_invalid_risk_probability():
    doc = minimal_doc(risk={"probability": 5, "impacts": {}})
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "risk.probability" in str(err.value)


def test_metric_kind_checked():
    doc = minimal_doc(metrics=[{"kind": "psychic", "trace": "freq"}])
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "metrics[0].kind" in str(err.value)


def test_invalid_threat_section_is_scenario_error():
    doc = minimal_doc(threat={"schema_version": 1})
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "threat" in str(err.value)


def test_scenario_hash_is_stable_and_sensitive():
    doc = presets.preset_doc("case2_load", "a")
    h1 = scenario_hash(doc)
    h2 = scenario_hash(json.loads(json.dumps(doc)))
    assert h1 == h2
    doc["seed"] += 1
    assert scenario_hash(doc) != h1


def test_load_scenario_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{oops")
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    assert "line" in str(err.value)


def test_contingency_unknown_machine_is_scenario_error():
    doc = minimal_doc()
    doc["grid"]["contingencies"] = [{"t": 1.0, "machine": "ghost"}]
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "contingencies" in str(err.value)
