import csv
import json
import os

import pytest

from main import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, error_line, main, resolve_workers
from utils.errors import ConfigError, DivergenceError

SMALL = {
    "area_side_m": 18,
    "references": "corners",
    "n_targets": 4,
    "grid_spacing_m": 1,
    "channel": "clear",
    "scheme": "cotar",
    "trials": 5,
    "seed": 3,
    "lattice_pitch_m": 4,
    "static_points": "center",
    "sweep": {"n_values": [1, 2], "p_values": [0.0, 1.0], "area_sides_m": [10, 20]},
    "mobility": {"speed_kmh": 40, "duration_s": 10, "tracks": 2},
}


@pytest.fixture
def config_file(tmp_path):
    def write(data=None, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(SMALL if data is None else data), encoding="utf-8")
        return str(path)
    return write


def run(config, out, *extra, command="simulate-static"):
    return main([command, "--config", config, "--out", str(out), "--quiet", *extra])


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as f:
        lines = f.read().split("\r\n", 1)
    return lines[0], list(csv.DictReader(lines[1].splitlines()))


def test_validate_config_accepts_good_file(config_file, tmp_path):
    assert run(config_file(), tmp_path / "out", command="validate-config") == EXIT_OK
    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary['results'] == {'valid': True}
    assert summary['command'] == 'validate-config'


def test_validate_config_rejects_bad_file(config_file, tmp_path, capsys):
    path = config_file(dict(SMALL, iterations=0, references=[[0, 0], [18, 0]]))
    assert run(path, tmp_path / "out", command="validate-config") == EXIT_CONFIG
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith("error kind=config field=")


def test_missing_config_file(tmp_path, capsys):
    assert run(str(tmp_path / "absent.json"), tmp_path / "out") == EXIT_CONFIG
    assert "kind=config" in capsys.readouterr().err


def test_crb_map_writes_one_grid_per_scheme(config_file, tmp_path):
    out = tmp_path / "maps"
    assert run(config_file(), out, command="crb-map") == EXIT_OK
    names = sorted(path.name for path in out.iterdir())
    assert names == ['crb_map_cotar.csv', 'crb_map_hybrid.csv', 'crb_map_rss_only.csv',
                     'crb_map_toa_only.csv', 'summary.json']
    header, rows = read_rows(out / 'crb_map_toa_only.csv')
    assert header.startswith("# cotar-sim ")
    assert header.endswith(" seed=3")
    assert list(rows[0]) == ['x', 'y', 'scheme', 'condition', 'metric', 'value_m']
    assert {row['metric'] for row in rows} == {'crb', 'eps'}


def test_static_run_replays_byte_for_byte(config_file, tmp_path):
    path = config_file()
    assert run(path, tmp_path / "a") == EXIT_OK
    assert run(path, tmp_path / "b", "--threads", "2") == EXIT_OK
    for name in ('static_points.csv', 'trials.csv'):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override(config_file, tmp_path):
    assert run(config_file(), tmp_path / "out", "--seed", "99") == EXIT_OK
    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary['seed'] == 99
    header, rows = read_rows(tmp_path / "out" / "trials.csv")
    assert header.endswith(" seed=99")
    assert len(rows) == 5 * 4


@pytest.mark.parametrize("command, table", [
    ("sweep-cooperation", "cooperation.csv"),
    ("sweep-missing-rss", "missing_rss.csv"),
    ("sweep-area", "area_sweep.csv"),
    ("simulate-mobile", "mobile_trials.csv"),
])
def test_experiment_commands_write_tables(config_file, tmp_path, command, table):
    out = tmp_path / command
    assert run(config_file(), out, command=command) == EXIT_OK
    _, rows = read_rows(out / table)
    assert rows
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary['files'] == [table]
    assert summary['config']['area_side_m'] == 18


def test_mobile_without_mobility_is_a_config_error(config_file, tmp_path, capsys):
    data = {key: value for key, value in SMALL.items() if key != "mobility"}
    assert run(config_file(data), tmp_path / "out", command="simulate-mobile") == EXIT_CONFIG
    assert "field=mobility" in capsys.readouterr().err


def test_bad_thread_count_is_rejected(config_file, tmp_path):
    with pytest.raises(SystemExit):
        run(config_file(), tmp_path / "out", "--threads", "-1")


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv("COTAR_THREADS", raising=False)
    assert resolve_workers(None) == 1
    assert resolve_workers(3) == 3
    assert resolve_workers(0) == (os.cpu_count() or 1)
    monkeypatch.setenv("COTAR_THREADS", "2")
    assert resolve_workers(None) == 2
    assert resolve_workers(4) == 4
    monkeypatch.setenv("COTAR_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_workers(None)


def test_error_line_format():
    assert (error_line(ConfigError("iterations", 'must be >= 1, got "0"'))
            == 'error kind=config field=iterations message="must be >= 1, got \\"0\\""')
    assert error_line(DivergenceError("left the box")).startswith("error kind=divergence field=- ")


def test_runtime_exit_code_constant():
    assert (EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG) == (0, 1, 2)


@pytest.mark.parametrize("extra", [("--bogus",), ("--threads", "-1"), ("--seed", "x")])
def test_usage_errors_are_one_line(config_file, tmp_path, capsys, extra):
    with pytest.raises(SystemExit) as info:
        run(config_file(), tmp_path / "out", *extra)
    assert info.value.code == EXIT_CONFIG
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith("error kind=config field=arguments message=")
