import json

import pytest

from reachlearn.config import (
    ConfigError,
    ExperimentConfig,
    desk_config,
    load_config,
    parse_config,
    save_config,
)


def test_empty_text_gives_defaults():
    assert parse_config("") == ExperimentConfig()
    assert parse_config("{}") == ExperimentConfig()


def test_documented_defaults():
    cfg = ExperimentConfig()
    assert cfg.network.hidden_size == 100 and cfg.experiment.corpus_size == 2000
    assert cfg.cem.population == 128 and cfg.cem.elite_count == 16 and cfg.cem.horizon == 14
    assert cfg.geometry.acc_limit == 20 and cfg.geometry.vel_limit == 4


def test_zero_corpus_names_field():
    text = '{\n  "experiment": {\n    "corpus_size": 0\n  }\n}'
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == "experiment.corpus_size" and err.value.line == 3
    assert "experiment.corpus_size" in str(err.value)


@pytest.mark.parametrize("text, key", [
    ('{"network": {"hiden_size": 3}}', "network.hiden_size"),
    ('{"cem": {"population": "many"}}', "cem.population"),
    ('{"bogus": 1}', "bogus"),
    ('{"experiment": {"conditions": ["rot", "other"]}}', "experiment.conditions"),
    ('{"network": {"hidden_size": 1.5}}', "network.hidden_size"),
])
def test_bad_keys_named(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key


def test_malformed_json():
    with pytest.raises(ConfigError) as err:
        parse_config('{"cem": {')
    assert err.value.key == "<json>"


def test_round_trip(tmp_path):
    cfg = desk_config(root_seed=11)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg
    assert load_config(tmp_path / "c.json").hash() == cfg.hash()


def test_partial_override():
    cfg = parse_config(json.dumps({"cem": {"population": 32, "elite_count": 4}, "root_seed": 3}))
    assert cfg.cem.population == 32 and cfg.cem.iterations == ExperimentConfig().cem.iterations
    assert cfg.root_seed == 3


def test_hash_sensitive():
    assert desk_config().hash() != ExperimentConfig().hash()
    assert desk_config().hash() == desk_config().hash()


def test_desk_scale():
    cfg = desk_config()
    assert cfg.network.hidden_size == 64 and cfg.cem.population == 64
    assert cfg.experiment.corpus_size == 2000 and cfg.experiment.restart_fraction == 1.0
    assert cfg.cem.elite_count < cfg.cem.population
    assert cfg.episode.walk_steps >= cfg.experiment.first_segment[1]


def test_defaults_leave_walks_unbroken():
    cfg = ExperimentConfig()
    assert cfg.experiment.restart_fraction == 0.0 and cfg.episode.walk_steps == 42
    assert cfg.training.epochs == 40 and cfg.training.batch_size == 32
    assert cfg.cem.init_stddev == cfg.geometry.acc_limit / 2
    assert cfg.cem.min_stddev == pytest.approx(0.02 * cfg.geometry.acc_limit)


@pytest.mark.parametrize("text, key", [
    ('{"experiment": {"restart_fraction": 1.5}}', "experiment.restart_fraction"),
    ('{"experiment": {"segment_steps": [9, 3]}}', "experiment.segment_steps"),
    ('{"experiment": {"first_segment": [0, 3]}}', "experiment.first_segment"),
    ('{"cem": {"elite_count": 200}}', "cem.elite_count"),
    ('{"cem": {"min_stddev": 0}}', "cem.min_stddev"),
    ('{"training": {"batch_size": 0}}', "training.batch_size"),
    ('{"geometry": {"upper_len": -1}}', "geometry.upper_len"),
    ('{"episode": {"max_steps": 28, "goal_radius": 0}}', "episode.goal_radius"),
])
def test_section_values_name_field(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key


def test_conflicting_fields_all_named():
    with pytest.raises(ConfigError) as err:
        parse_config('{"cem": {"population": 64, "elite_count": 80}}')
    assert err.value.key == "cem.population, cem.elite_count"


def test_shipped_configs_match_code():
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent / "configs"
    assert load_config(root / "desk.json") == desk_config()
    assert load_config(root / "full.json") == ExperimentConfig()
