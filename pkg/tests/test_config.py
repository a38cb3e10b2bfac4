import json

import pytest

from src.core.config import (DEFAULT_CONFIG, ConfigurationError, deep_merge_config, load_config, resolve_arity,
                             resolve_max_failures, resolve_workers)


def test_deep_merge_keeps_defaults():
    merged = deep_merge_config(DEFAULT_CONFIG, {"arity": {"default": 3}, "workers": 2})
    assert merged["arity"] == {"default": 3, "hard_cap": 7, "warn_above": 5}
    assert merged["workers"] == 2
    assert DEFAULT_CONFIG["arity"]["default"] == 4


def test_load_config_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"output": {"indent": 4}}))
    config = load_config(path)
    assert config["output"]["indent"] == 4
    assert config["output"]["format"] == "json"


def test_unreadable_config_falls_back_to_defaults(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert load_config(path) == DEFAULT_CONFIG
    assert load_config(tmp_path / "missing.json") == DEFAULT_CONFIG
    path.write_text("[1, 2]")
    assert load_config(path) == DEFAULT_CONFIG


def test_resolve_arity():
    config = deep_merge_config(DEFAULT_CONFIG, {})
    assert resolve_arity(config, None) == 4
    assert resolve_arity(config, 2) == 2
    assert resolve_arity(config, 11) == 7
    with pytest.raises(ConfigurationError):
        resolve_arity(config, 0)


@pytest.mark.parametrize("value", [0, -2, "many", True, 1.5])
def test_invalid_workers(value):
    with pytest.raises(ConfigurationError):
        resolve_workers({"workers": value})


def test_workers():
    assert resolve_workers({"workers": 3}) == 3
    assert resolve_workers({"workers": "auto"}) >= 1
    assert resolve_workers({}) == 1


def test_resolve_max_failures():
    assert resolve_max_failures(deep_merge_config(DEFAULT_CONFIG, {})) is None
    assert resolve_max_failures(deep_merge_config(DEFAULT_CONFIG, {"output": {"max_failures": 5}})) == 5
    for bad in (-1, "ten", True):
        with pytest.raises(ConfigurationError):
            resolve_max_failures(deep_merge_config(DEFAULT_CONFIG, {"output": {"max_failures": bad}}))
