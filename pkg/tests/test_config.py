"""Tests for optimizer configuration."""

import pytest

from posevo import config as cfg_mod
from posevo.errors import ConfigError


def test_defaults():
    cfg = cfg_mod.EAConfig()
    assert cfg.population_size == 200
    assert cfg.elite_count == 2
    assert cfg.tournament_size == 3
    assert cfg.crossover_probability == 0.5
    assert cfg.mutation_scale == 0.1
    assert cfg.eval_budget == 100_000
    assert cfg.offspring_count == 198


def test_default_mutation_rate_scales_with_dof():
    cfg = cfg_mod.EAConfig()
    assert cfg.resolved_mutation_rate(39) == pytest.approx(3 / 39)
    assert cfg.resolved_mutation_rate(2) == 1.0
    assert cfg_mod.EAConfig(mutation_rate=0.2).resolved_mutation_rate(39) == 0.2


@pytest.mark.parametrize(
    "values, field",
    [
        ({"population_size": 0}, "population_size"),
        ({"crossover_probability": 1.5}, "crossover_probability"),
        ({"mutation_rate": -0.1}, "mutation_rate"),
        ({"seed": -1}, "seed"),
        ({"workers": 0}, "workers"),
        ({"generations": 10}, "generations"),
    ],
)
def test_invalid_values_name_the_field(values, field):
    with pytest.raises(ConfigError) as exc_info:
        cfg_mod.build_config(values)
    assert field in exc_info.value.errors


def test_unknown_key_message():
    with pytest.raises(ConfigError, match="generations: unknown key"):
        cfg_mod.build_config({"generations": 10})


def test_elite_must_be_smaller_than_population():
    with pytest.raises(ConfigError, match="elite_count"):
        cfg_mod.build_config({"population_size": 4, "elite_count": 4})


def test_tournament_cannot_exceed_population():
    with pytest.raises(ConfigError, match="tournament_size"):
        cfg_mod.build_config({"population_size": 4, "tournament_size": 5})


def test_config_is_frozen():
    cfg = cfg_mod.EAConfig()
    with pytest.raises(Exception):
        cfg.seed = 3


def test_parse_text_with_comments():
    text = "# search settings\npopulation_size = 50\n\nseed=7  # fixed\n"
    assert cfg_mod.parse_config_text(text) == {"population_size": "50", "seed": "7"}


def test_parse_text_rejects_duplicates():
    with pytest.raises(ConfigError, match="duplicate key"):
        cfg_mod.parse_config_text("seed = 1\nseed = 2\n")


def test_parse_text_rejects_lines_without_equals():
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        cfg_mod.parse_config_text("population_size 50\n", "run.cfg")


def test_load_layers_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("population_size = 50\nseed = 7\n")
    cfg = cfg_mod.load_config(path, {"seed": 9, "eval_budget": None})
    assert cfg.population_size == 50
    assert cfg.seed == 9
    assert cfg.eval_budget == 100_000


def test_text_round_trip(tmp_path):
    cfg = cfg_mod.EAConfig(population_size=30, elite_count=1, seed=42)
    path = tmp_path / "run.cfg"
    path.write_text(cfg.to_text())
    assert cfg_mod.load_config(path) == cfg


def test_missing_file_raises_os_error(tmp_path):
    with pytest.raises(OSError):
        cfg_mod.load_config(tmp_path / "absent.cfg")
