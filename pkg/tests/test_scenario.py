import copy
import json

import numpy as np
import pytest

from dtmsim.model import ScenarioError, load_scenario
from dtmsim.model.scenario import bundled_path, reduced_document, save_document


def test_bundled_scenario_shape(ieee39):
    m = ieee39.model
    assert m.n == 10
    assert ieee39.machine_buses == tuple(range(30, 40))
    assert m.omega_s == pytest.approx(2 * np.pi * 60)
    assert m.network.t_fault == 1.0
    assert m.network.t_clear == pytest.approx(1.0 + 5.0 / 60.0)
    assert ieee39.defaults["order"] == 12
    assert ieee39.defaults["window"] == 0.2


def test_load_by_path_and_by_name_agree(ieee39):
    by_path = load_scenario(bundled_path("ieee39"))
    assert np.array_equal(by_path.model.initial_state, ieee39.model.initial_state)


def test_reduced_round_trip(ieee39, tmp_path):
    doc = reduced_document(ieee39)
    path = tmp_path / "reduced.json"
    save_document(doc, path)
    again = load_scenario(path)
    assert np.array_equal(again.model.initial_state, ieee39.model.initial_state)
    for s in ("pre", "fault", "post"):
        assert np.array_equal(again.model.network.matrix(s), ieee39.model.network.matrix(s))
    assert again.model.machines == ieee39.model.machines
    # reducing an already-reduced scenario passes it through unchanged
    assert reduced_document(again) == json.loads(path.read_text())


def test_unknown_scenario():
    with pytest.raises(ScenarioError):
        load_scenario("no-such-scenario")
    with pytest.raises(ScenarioError):
        bundled_path("ieee118")


def test_malformed_documents(ieee39):
    doc = copy.deepcopy(ieee39.document)
    doc["machines"] = []
    with pytest.raises(ScenarioError):
        load_scenario(doc)
    doc = copy.deepcopy(ieee39.document)
    del doc["machines"][0]["H"]
    with pytest.raises(ScenarioError):
        load_scenario(doc)
    doc = copy.deepcopy(ieee39.document)
    doc["machines"][0]["H"] = -1.0
    with pytest.raises(ScenarioError):
        load_scenario(doc)


def test_inconsistent_generation_is_rejected(ieee39):
    doc = copy.deepcopy(ieee39.document)
    doc["network"]["generation"][0]["p"] += 0.1
    with pytest.raises(ScenarioError, match="disagrees"):
        load_scenario(doc)


def test_scenario_file_is_valid_json():
    doc = json.loads(bundled_path("ieee39").read_text())
    assert {"machines", "network", "event", "simulation"} <= set(doc)
