from __future__ import annotations

import json

import pytest

from mera.config import ControllerConfig, load_config


def test_defaults():
    config = load_config()
    assert config.reward.success_bonus == 1.0
    assert config.reward.latency_horizon == 120.0
    assert config.credit.max_weight == 0.5
    assert config.bandit.ridge == 1.0
    assert config.bandit.exploration == 0.6
    assert config.memory.weights.token == 0.4
    assert config.grace.top_k == 2
    assert config.decoding.enabled is False


def test_file_layer_overrides_selected_fields(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "reward": {"latency_weight": 0.0, "progress_weight": 0.2},
                "bandit": {"exploration": 1.5},
                "memory": {"weights": {"token": 0.7}},
            }
        )
    )
    config = load_config(path)
    assert config.reward.latency_weight == 0.0
    assert config.reward.progress_weight == 0.2
    assert config.reward.success_bonus == 1.0  # untouched default
    assert config.bandit.exploration == 1.5
    assert config.memory.weights.token == 0.7
    assert config.memory.weights.ast == 0.3


def test_override_layer_wins_over_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"bandit": {"ridge": 3.0}}))
    config = load_config(path, overrides={"bandit": {"ridge": 5.0}})
    assert config.bandit.ridge == 5.0


def test_unknown_keys_rejected():
    with pytest.raises(ValueError):
        load_config(overrides={"rewards": {}})
    with pytest.raises(ValueError):
        load_config(overrides={"reward": {"bogus_knob": 1}})


def test_config_is_immutable():
    config = ControllerConfig()
    with pytest.raises(Exception):
        config.reward = None
