import glob
import json
import os

import pytest

from hflsim.config import ScenarioConfig, from_dict, parse_config, serialize_config
from hflsim.errors import ConfigError

SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def test_minimal_config_resolves_defaults():
    cfg = parse_config('{"seed": 0}')
    d = cfg.to_dict()
    assert d["rounds"] == 30 and d["eta"] == 0.05
    assert d["scheduler"] == {"kind": "adaprs", "tau1": 6, "tau2": 4, "iteration_budget": 24,
                              "performance": "neg_loss", "probe_size": 32}
    assert d["policy"] == {"kind": "fedgau", "epsilon": 1e-6}
    assert d["topology"] == {"edges": 3, "vehicles_per_edge": 3}
    assert cfg.task.seed == 0


def test_missing_seed_is_an_error():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("{}")


@pytest.mark.parametrize("raw, fragment", [
    ({"seed": 0, "scheduler": {"kind": "statrs", "tau1": 3, "tau2": 2, "iteration_budget": 5}},
     "scheduler.iteration_budget"),
    ({"seed": 0, "colour": 1}, "colour: unknown key"),
    ({"seed": 0, "task": {"depth": 3}}, "task.depth: unknown key"),
    ({"seed": 0, "task": {"seed": 3}}, "task.seed: unknown key"),
    ({"seed": 0, "policy": {"kind": "best"}}, "policy"),
    ({"seed": 0, "rounds": 0}, "rounds"),
    ({"seed": 0, "topology": {"edges": 2, "vehicles_per_edge": [1, 2, 3]}}, "topology.vehicles_per_edge"),
    ({"seed": 0, "task": {"edge_shift_scales": [1.0]}}, "edge_shift_scales"),
    ({"seed": -1}, "seed"),
    ({"seed": "7"}, "seed"),
    ({"seed": 0, "scheduler": {"performance": "speed"}}, "scheduler.performance"),
])
def test_errors_carry_key_path(raw, fragment):
    with pytest.raises(ConfigError, match=fragment.replace(".", r"\.")):
        from_dict(raw)


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(str(tmp_path / "missing.json"))
    p = tmp_path / "bad.json"
    p.write_text("{seed: 1")
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config(str(p))


def test_overrides():
    cfg = parse_config('{"seed": 4}').with_overrides(**{"policy.kind": "proportional", "rounds": 3})
    assert cfg.policy.kind == "proportional" and cfg.rounds == 3 and cfg.seed == 4


SCENARIO_FILES = sorted(p for p in glob.glob(os.path.join(SCENARIOS, "*.json"))
                        if os.path.basename(p) != "schedule_params.json")


@pytest.mark.parametrize("path", SCENARIO_FILES, ids=os.path.basename)
def test_shipped_files_round_trip(path):
    cfg = parse_config(path)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
    assert "seed" in json.load(open(path))


def test_list_topology_round_trip():
    cfg = from_dict({"seed": 1, "topology": {"edges": 2, "vehicles_per_edge": [2, 5]},
                     "task": {"edge_shift_scales": [1, 2]}})
    assert cfg.topology.build().to_dict()["edges"][1]["vehicles"][-1] == "edge1/veh4"
    assert from_dict(json.loads(serialize_config(cfg))) == cfg
    assert isinstance(cfg, ScenarioConfig)
