import json
import logging
from pathlib import Path

import pytest

from channel.model import ChannelCondition
from scenario.geometry import Scheme
from utils.config import (config_from_dict, config_hash, load_config, read_config_data,
                          save_config, validate_config)
from utils.errors import ConfigError

MINIMAL = {
    "area_side_m": 50,
    "references": "corners",
    "n_targets": 4,
    "grid_spacing_m": 1,
    "channel": "clear",
    "scheme": "cotar",
}


def write_json(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_minimal_config_gets_defaults(tmp_path):
    config = load_config(write_json(tmp_path, MINIMAL))
    assert config.iterations == 2
    assert config.seed == 0
    assert config.trials == 1000
    assert config.p_missing_rss == 0.0
    assert config.scheme is Scheme.COTAR
    assert config.channel.condition is ChannelCondition.CLEAR
    assert config.channel.sigma_g == 8.0
    assert config.channel.eta == pytest.approx(3.086)
    assert config.mobility is None
    assert config.static_points == "lattice"
    assert config.mask_policy == "delete"


def test_corner_references_resolved():
    config = config_from_dict(MINIMAL)
    assert config.references.points().tolist() == [[0, 0], [50, 0], [0, 50], [50, 50]]
    assert config.formation == ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))


def test_two_references_rejected(tmp_path):
    data = dict(MINIMAL, references=[[0, 0], [50, 0]])
    with pytest.raises(ConfigError, match="reference count below minimum 3") as info:
        load_config(write_json(tmp_path, data))
    assert info.value.field == "references"


def test_validate_reports_every_problem():
    data = dict(MINIMAL, iterations=0, p_missing_rss=1.5, scheme="gps",
                mobility={"speed_kmh": -1, "duration_s": 60})
    fields = {error.field for error in validate_config(data)}
    assert {"iterations", "p_missing_rss", "scheme", "mobility.speed_kmh"} <= fields


def test_valid_config_has_no_problems():
    assert validate_config(MINIMAL) == []


def test_mobility_interval_must_fit_duration():
    data = dict(MINIMAL, mobility={"speed_kmh": 80, "sample_interval_s": 10, "duration_s": 5})
    errors = validate_config(data)
    assert [error.field for error in errors] == ["mobility.duration_s"]


def test_mobility_defaults():
    config = config_from_dict(dict(MINIMAL, mobility={"speed_kmh": 80, "duration_s": 100}))
    assert config.mobility.sample_interval_s == 5.0
    assert config.mobility.tracks == 200
    assert config.mobility.initial_heading == "random"
    assert config.mobility.n_samples == 21


def test_channel_override_block():
    data = dict(MINIMAL, channel={"k_factor": 3, "toa_std_ns": 20, "shadow_std_db": 6,
                                  "eta": 2.5, "g0_db": 40})
    channel = config_from_dict(data).channel
    assert channel.condition is ChannelCondition.CUSTOM
    assert channel.sigma_tau == pytest.approx(20e-9)
    assert channel.sigma_g == 6.0
    assert channel.g0 == 40.0


def test_obstructed_preset():
    channel = config_from_dict(dict(MINIMAL, channel="obstructed")).channel
    assert channel.sigma_tau == pytest.approx(40.2e-9)
    assert channel.k_factor == 2.0


def test_unknown_key_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="utils.config"):
        config_from_dict(dict(MINIMAL, colour="blue"))
    assert "colour" in caplog.text


def test_explicit_formation_and_grid_references():
    data = dict(MINIMAL, references={"grid_pitch_m": 25}, formation=[[0, 0], [1, 0]])
    data.pop("n_targets")
    config = config_from_dict(data)
    assert config.references.m == 9
    assert config.n_targets == 2


def test_formation_count_mismatch():
    data = dict(MINIMAL, formation=[[0, 0], [1, 0]])
    assert [error.field for error in validate_config(data)] == ["formation"]


def test_load_is_deterministic(tmp_path):
    path = write_json(tmp_path, MINIMAL)
    assert config_hash(load_config(path)) == config_hash(load_config(path))
    other = config_from_dict(dict(MINIMAL, seed=1))
    assert config_hash(other) != config_hash(load_config(path))


def test_invalid_json_is_a_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.field == "config"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_save_and_reload_keeps_meaning(tmp_path):
    config = config_from_dict(dict(MINIMAL, mobility={"speed_kmh": 80, "duration_s": 100}))
    path = tmp_path / "saved.json"
    save_config(config, path)
    reloaded = load_config(path)
    assert reloaded.references == config.references
    assert reloaded.formation == config.formation
    assert reloaded.scheme is config.scheme
    assert reloaded.mobility == config.mobility
    assert reloaded.channel.sigma_tau == pytest.approx(config.channel.sigma_tau)


@pytest.mark.parametrize("name", ["square50.json", "mobile.json", "nine_references.json"])
def test_bundled_experiments_are_valid(name):
    path = Path(__file__).resolve().parent.parent / "experiments" / name
    assert validate_config(read_config_data(path)) == []
