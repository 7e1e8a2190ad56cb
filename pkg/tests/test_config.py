import json

import pytest

from triteleop.config import (ConfigError, RunConfig, apply_overrides,
                              config_from_dict, load_config)


def test_defaults():
    cfg = RunConfig()
    assert cfg.clock == "virtual"
    assert cfg.scale.max_v == 2.0 and cfg.scale.max_w == 0.2
    assert cfg.follower_geometry.d_min == 214.0
    assert cfg.haptics.f_max == 15.0
    assert cfg.motors.rotary.kind == "rotary"
    assert len(cfg.motors.bank_list()) == 6


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="unknown top-level"):
        config_from_dict({"sede": 1})


def test_unknown_nested_key_rejected():
    with pytest.raises(ConfigError, match="scale"):
        config_from_dict({"scale": {"max_velocity": 3}})
    with pytest.raises(ConfigError, match="motors.rotary"):
        config_from_dict({"motors": {"rotary": {"lead": 1.8}}})


def test_motor_key_mapping():
    cfg = config_from_dict({"motors": {
        "rotary": {"steps_per_rev": 400, "deg_per_step": 0.9},
        "linear": {"steps_per_rev": 400, "mm_per_rev": 4.0}}})
    assert cfg.motors.rotary.lead == 0.9
    assert cfg.motors.linear.step_size == 0.01


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"clock": "lunar"})
    with pytest.raises(ConfigError):
        config_from_dict({"leader_rate_hz": 1000, "follower_rate_hz": 2500})
    with pytest.raises(ConfigError):
        config_from_dict({"scale": {"max_v": -1.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"scenario": {"kind": "teleport"}})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)


def test_load_config_roundtrip(tmp_path):
    doc = {"seed": 3, "scale": {"max_v": 10.0, "max_w": 1.0},
           "follower_geometry": {"d_min": 220.0}}
    p = tmp_path / "run.json"
    p.write_text(json.dumps(doc))
    cfg = load_config(p)
    assert cfg.seed == 3
    assert cfg.scale.max_v == 10.0
    assert cfg.follower_geometry.d_min == 220.0
    assert cfg.follower_geometry.d_max == 354.0    # untouched default


def test_apply_overrides():
    cfg = RunConfig()
    cfg2 = apply_overrides(cfg, {"scale.max_v": 12.5, "seed": 4})
    assert cfg2.scale.max_v == 12.5 and cfg2.seed == 4
    with pytest.raises(ConfigError, match="override path"):
        apply_overrides(cfg, {"scale.velocity": 1})


def test_bundled_tracking_config_loads():
    from importlib import resources
    path = resources.files("triteleop").joinpath("data",
                                                 "sinusoid-tracking.json")
    cfg = load_config(path)
    assert cfg.scenario.kind == "sinusoid"
    assert cfg.limits.max_translation_err_mm == 0.25
    assert cfg.limits.max_rotation_err_deg == 0.15
