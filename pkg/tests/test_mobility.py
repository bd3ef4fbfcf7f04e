import csv
import io
import json
import math

import numpy as np
import pytest

from scenario.geometry import PositionVector
from simulation.mobility import MobilitySpec, ReflectingWalker, reflect
from simulation.records import (TrialRecord, artifact_header, rms_error, write_csv,
                                write_summary_json, write_trial_csv)
from utils.errors import ConfigError


@pytest.mark.parametrize("position, velocity, expected", [
    (5.0, 1.0, (5.0, 1.0)),
    (12.0, 1.0, (8.0, -1.0)),
    (-3.0, -1.0, (3.0, 1.0)),
    (25.0, 1.0, (5.0, 1.0)),
    (10.0, 1.0, (10.0, -1.0)),
])
def test_reflect(position, velocity, expected):
    assert reflect(position, velocity, 0.0, 10.0) == pytest.approx(expected)


def test_reflect_degenerate_span():
    assert reflect(3.0, 1.0, 2.0, 2.0) == (2.0, 1.0)


def test_walker_preserves_speed_and_bounds():
    walker = ReflectingWalker((1.0, 1.0), 0.3, 44.4, (0.0, 99.0, 0.0, 100.0),
                              np.random.default_rng(0))
    for _ in range(50):
        x, y = walker.advance(5.0)
        assert 0.0 <= x <= 99.0
        assert 0.0 <= y <= 100.0
        assert np.hypot(*walker.velocity) == pytest.approx(44.4)


def test_walker_straight_line_until_a_wall():
    walker = ReflectingWalker((10.0, 10.0), 0.0, 2.0, (0.0, 100.0, 0.0, 100.0),
                              np.random.default_rng(0))
    assert walker.advance(5.0) == pytest.approx((20.0, 10.0))
    assert walker.advance(45.0) == pytest.approx((90.0, 10.0))
    assert walker.velocity[0] < 0


def test_walker_heading_changes():
    walker = ReflectingWalker((50.0, 50.0), 0.0, 1.0, (0.0, 100.0, 0.0, 100.0),
                              np.random.default_rng(4), heading_change_period_s=1.0)
    walker.advance(3.0)
    assert not np.allclose(walker.velocity, [1.0, 0.0])
    assert np.hypot(*walker.velocity) == pytest.approx(1.0)


def test_mobility_spec():
    spec = MobilitySpec(speed_kmh=36.0, duration_s=12.0)
    assert spec.speed_ms == pytest.approx(10.0)
    assert spec.n_samples == 3
    with pytest.raises(ConfigError) as info:
        MobilitySpec(speed_kmh=10.0, duration_s=60.0, initial_heading="north")
    assert info.value.field == "mobility.initial_heading"
    with pytest.raises(ConfigError):
        MobilitySpec(speed_kmh=10.0, duration_s=60.0, tracks=0)


def make_record(trial, estimate_x, failure=None):
    truth = PositionVector([1.0, 2.0], [0.0, 0.0])
    estimate = None if failure else PositionVector(estimate_x, [0.0, 0.0])
    return TrialRecord(trial, 0, truth, estimate, 2, failure=failure)


def test_rms_error_skips_failures():
    records = [make_record(0, [4.0, 2.0]), make_record(1, None, failure="diverged")]
    assert records[0].errors.tolist() == [3.0, 0.0]
    assert rms_error(records) == pytest.approx(math.sqrt(9.0 / 2.0))
    assert math.isnan(rms_error(records[1:]))
    assert np.isnan(records[1].errors).all()


def test_trial_csv_layout(tmp_path):
    header = artifact_header("1.0.0", "ab" * 32, 42)
    path = write_trial_csv(tmp_path / "trials.csv",
                           [make_record(0, [1.5, 2.0]), make_record(1, None, failure="x")], header)
    raw = path.read_bytes()
    assert raw.startswith(b"# cotar-sim 1.0.0 config_sha256=" + b"ab" * 32 + b" seed=42\r\n")
    assert raw.count(b"\r\n") == 4
    rows = list(csv.reader(io.StringIO(raw.decode("utf-8").split("\r\n", 1)[1])))
    assert rows[0] == ['trial', 'step', 'node', 'true_x', 'true_y', 'est_x', 'est_y', 'err_m',
                       'iters']
    assert rows[1][:3] == ['0', '0', '1']
    assert float(rows[1][7]) == 0.5


def test_floats_survive_csv(tmp_path):
    value = 0.1 + 0.2
    path = write_csv(tmp_path / "values.csv", ['v'], [[value], [np.float64(1 / 3)]])
    with path.open(newline='', encoding='utf-8') as f:
        rows = list(csv.reader(f))
    assert float(rows[1][0]) == value
    assert float(rows[2][0]) == 1 / 3


def test_summary_json_nulls_non_finite(tmp_path):
    path = write_summary_json(tmp_path / "summary.json",
                              {'rms_m': math.nan, 'eps': np.float64(1.5), 'points': np.int64(3),
                               'values': np.array([1.0, math.inf])})
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data == {'rms_m': None, 'eps': 1.5, 'points': 3, 'values': [1.0, None]}
