import pytest

from radioslam.config import (
    PipelineConfig,
    build_config,
    config_from_dict,
    config_to_dict,
    deep_merge,
    load_config_file,
    parse_override_value,
    set_dotted,
)
from radioslam.errors import ConfigError


def test_empty_build_equals_defaults():
    assert build_config(None, {}) == PipelineConfig()


def test_round_trip_through_dict():
    cfg = PipelineConfig()
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_json_file_overrides_defaults(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"window_s": 8.0, "similarity": {"sigma_tau": 2.5}}')
    cfg = build_config(p, {})
    assert cfg.window_s == 8.0
    assert cfg.similarity.sigma_tau == 2.5
    assert cfg.model_r == PipelineConfig().model_r


def test_toml_file_overrides_defaults(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text('window_s = 8.0\n[similarity]\nmeasure = "cosine"\n')
    cfg = build_config(p, {})
    assert cfg.window_s == 8.0
    assert cfg.similarity.measure == "cosine"


def test_overrides_beat_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"window_s": 8.0}')
    cfg = build_config(p, {"window_s": 12.0, "loop.nu_s": 4.5})
    assert cfg.window_s == 12.0
    assert cfg.loop.nu_s == 4.5


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="window_sz"):
        config_from_dict({"window_sz": 8.0})
    with pytest.raises(ConfigError):
        config_from_dict({"similarity": {"sigmas": 1.0}})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"window_s": -1.0})
    with pytest.raises(ConfigError):
        config_from_dict({"model_r": 0.0})
    with pytest.raises(ConfigError):
        config_from_dict({"similarity": {"measure": "bogus"}})
    with pytest.raises(ConfigError):
        config_from_dict({"threads": 0})


def test_missing_file_raises(tmp_path):
    # file-system problems surface as OSError; the CLI maps those to exit 3
    with pytest.raises(OSError):
        load_config_file(tmp_path / "absent.json")


def test_malformed_file_raises(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(p)


def test_deep_merge_nested_precedence():
    base = {"a": {"x": 1, "y": 2}, "b": 3}
    over = {"a": {"y": 9}, "c": 4}
    assert deep_merge(base, over) == {"a": {"x": 1, "y": 9}, "b": 3, "c": 4}


def test_set_dotted_creates_nested_path():
    d = {}
    set_dotted(d, "loop.nu_s", 3.0)
    set_dotted(d, "loop.nu_p", 4.0)
    assert d == {"loop": {"nu_s": 3.0, "nu_p": 4.0}}


def test_parse_override_value_literals():
    assert parse_override_value("3") == 3
    assert parse_override_value("3.5") == 3.5
    assert parse_override_value("true") is True
    assert parse_override_value("null") is None
    assert parse_override_value("[1, 2]") == [1, 2]
    assert parse_override_value("cosine") == "cosine"
