import json

import pytest
from hypothesis import given, settings, strategies as st

from modal_sentinel.config import PipelineConfig, damage_case_config, from_dict, load_config
from modal_sentinel.errors import ConfigError


def test_default_round_trip():
    cfg = PipelineConfig()
    assert from_dict(json.loads(cfg.to_json())) == cfg


def test_damage_case_round_trip():
    cfg = damage_case_config(2, "D2")
    back = from_dict(json.loads(cfg.to_json()))
    assert back == cfg
    assert back.damage.locations == cfg.damage.locations


@settings(max_examples=40, deadline=None)
@given(length=st.floats(0.2, 3.0), rank=st.one_of(st.none(), st.integers(1, 200)),
       fraction=st.floats(0.1, 0.9), seed=st.integers(0, 2**31),
       kinds=st.lists(st.sampled_from(["MS", "MSS", "MSC", "MSCS"]), min_size=1, unique=True))
def test_round_trip_property(length, rank, fraction, seed, kinds):
    doc = {"name": "x", "seed": seed, "beam": {"length": length},
           "dmd": {"rank": rank, "train_fraction": fraction}, "features": {"kinds": kinds}}
    cfg = from_dict(doc)
    assert from_dict(json.loads(cfg.to_json())) == cfg
    assert cfg.to_json() == from_dict(json.loads(cfg.to_json())).to_json()


def test_partial_document_uses_defaults():
    cfg = from_dict({"simulation": {"samples": 100}})
    assert cfg.simulation.samples == 100
    assert cfg.simulation.grid_points == 41
    assert cfg.beam == PipelineConfig().beam


@pytest.mark.parametrize("doc,field", [
    ({"beam": {"length": 0.0}}, "beam.length"),
    ({"beam": {"length": -1.0}}, "beam.length"),
    ({"beam": {"damping_coefficient": -0.1}}, "beam.damping_coefficient"),
    ({"simulation": {"dt": 0}}, "simulation.dt"),
    ({"simulation": {"grid_points": 2.5}}, "simulation.grid_points"),
    ({"dmd": {"train_fraction": 1.0}}, "dmd.train_fraction"),
    ({"dmd": {"rank": 0}}, "dmd.rank"),
    ({"features": {"kinds": ["XYZ"]}}, "features.kinds"),
    ({"features": {"min_similarity": 1.5}}, "features.min_similarity"),
    ({"damage": {"locations": [0.9], "severities": [0.1]}}, "damage.locations"),
    ({"damage": {"locations": [0.1], "severities": [1.2]}}, "damage"),
    ({"beam": {"lenght": 1.0}}, "beam.lenght"),
    ({"colour": 1}, "colour"),
    ({"name": ""}, "name"),
])
def test_invalid_fields_named(doc, field):
    with pytest.raises(ConfigError) as info:
        from_dict(doc)
    assert info.value.field == field
    assert field in str(info.value)


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(damage_case_config(1, "D1").to_json())
    assert load_config(path).name == "D1"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_resolved_defaults():
    cfg = PipelineConfig()
    assert cfg.resolved_embedding("simulation") == 2
    assert cfg.resolved_embedding("frames") == 1
    assert cfg.resolved_rank("simulation") == 12
    assert cfg.resolved_rank("frames") == 150
