"""
Trial records and the CSV/JSON artifacts written by experiment runs.
Every CSV starts with one comment line naming the tool version, the
configuration hash and the seed.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from scenario.geometry import PositionVector

TOOL_NAME = "cotar-sim"
TRIAL_COLUMNS = ['trial', 'step', 'node', 'true_x', 'true_y', 'est_x', 'est_y', 'err_m', 'iters']


@dataclass(frozen=True)
class TrialRecord:
    """
    One localization attempt.

    `step` is the time step of a tracking run and the lattice point index of
    a static run. A failed attempt has no estimate and carries the error text.
    """
    trial: int
    step: int
    truth: PositionVector
    estimate: Optional[PositionVector]
    iterations: int
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.estimate is not None

    @property
    def errors(self) -> np.ndarray:
        """Per-node Euclidean error in meters (NaN when the attempt failed)."""
        if self.estimate is None:
            return np.full(self.truth.n, np.nan)
        return np.hypot(self.estimate.x - self.truth.x, self.estimate.y - self.truth.y)

    @property
    def squared_error(self) -> float:
        """Sum over nodes of squared errors."""
        return float(np.sum(self.errors ** 2))


def rms_error(records: Iterable[TrialRecord]) -> float:
    """sqrt(mean over successful trials and nodes of the squared node error)."""
    total, count = 0.0, 0
    for record in records:
        if record.ok:
            total += record.squared_error
            count += record.truth.n
    return math.sqrt(total / count) if count else math.nan


def artifact_header(version: str, config_sha256: str, seed: int) -> str:
    return f"# {TOOL_NAME} {version} config_sha256={config_sha256} seed={seed}"


def _format(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Iterable[Sequence[Any]],
              header: Optional[str] = None) -> Path:
    """
    Write an RFC-4180 CSV (UTF-8, CRLF line ends) with an optional comment line.

    Floats are written with repr() so values survive a round trip exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        if header:
            f.write(header + "\r\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(value) for value in row])
    return path


def trial_rows(records: Iterable[TrialRecord]) -> Iterable[List[Any]]:
    """CSV rows for successful trials, one per node (node is 1-based)."""
    for record in records:
        if not record.ok:
            continue
        errors = record.errors
        for node in range(record.truth.n):
            yield [record.trial, record.step, node + 1,
                   record.truth.x[node], record.truth.y[node],
                   record.estimate.x[node], record.estimate.y[node],
                   errors[node], record.iterations]


def write_trial_csv(path: Union[str, Path], records: Iterable[TrialRecord],
                    header: Optional[str] = None) -> Path:
    return write_csv(path, TRIAL_COLUMNS, trial_rows(records), header)


def _json_ready(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    if isinstance(value, np.ndarray):
        return _json_ready(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_summary_json(path: Union[str, Path], summary: Dict[str, Any]) -> Path:
    """Write the run summary (config echo, aggregates, failure counts)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_json_ready(summary), f, indent=2, sort_keys=True)
        f.write("\n")
    return path
