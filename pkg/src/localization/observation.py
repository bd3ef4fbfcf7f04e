"""
Observation model: which measurements exist, what they should read, how
noisy they are, and synthetic draws with missing neighbor RSS.

Row order for a cooperative layout is fixed: every neighbor RSS pair in
lexicographic order, then M TOA rows per target, then M remote RSS rows
per target. Node and reference indices are 0-based in memory and 1-based
in every file written.
"""

import csv
import logging
from dataclasses import dataclass
from enum import IntEnum
from itertools import combinations
from pathlib import Path
from typing import IO, List, Optional, Sequence, Tuple, Union

import numpy as np

from channel.model import ChannelParams, PhysConst, rss_variance, toa_variance
from scenario.geometry import PositionVector, ReferenceLayout, Scheme
from utils.errors import DegenerateGeometryError

logger = logging.getLogger(__name__)

DEGENERATE_DISTANCE = 1e-6  # meters; below this a row is undefined
NEAR_DISTANCE = 0.1  # meters; below this RSS gradients blow up


class RowKind(IntEnum):
    """Measurement modality of an observation row."""
    NEIGHBOR_RSS = 0
    TOA = 1
    REMOTE_RSS = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True, eq=False)
class ObservationLayout:
    """
    Identity of every measurement row.

    NEIGHBOR_RSS rows pair target i with target j (i < j); TOA and
    REMOTE_RSS rows pair target i with reference j.
    """
    n_targets: int
    n_refs: int
    scheme: Scheme
    kind: np.ndarray    # RowKind codes
    i: np.ndarray
    j: np.ndarray
    row_id: np.ndarray  # position in the unmasked layout

    @classmethod
    def of_kinds(cls, n_targets: int, n_refs: int, kinds: Sequence[RowKind],
                 scheme: Scheme = Scheme.COTAR) -> 'ObservationLayout':
        """Layout holding only the given row kinds, in canonical order."""
        rows: List[Tuple[int, int, int]] = []
        if RowKind.NEIGHBOR_RSS in kinds:
            rows.extend((RowKind.NEIGHBOR_RSS, p, q) for p, q in combinations(range(n_targets), 2))
        for kind in (RowKind.TOA, RowKind.REMOTE_RSS):
            if kind in kinds:
                rows.extend((kind, i, j) for i in range(n_targets) for j in range(n_refs))
        table = np.array(rows, dtype=np.int64).reshape(-1, 3)
        return cls(n_targets=n_targets, n_refs=n_refs, scheme=scheme,
                   kind=_frozen(table[:, 0]), i=_frozen(table[:, 1]), j=_frozen(table[:, 2]),
                   row_id=_frozen(np.arange(len(table))))

    @classmethod
    def build(cls, n_targets: int, n_refs: int, scheme: Scheme) -> 'ObservationLayout':
        """
        Rows present for a scheme.

        Args:
            n_targets: Number of targets N
            n_refs: Number of references M
            scheme: Localization scheme

        Returns:
            Layout with C(N,2) + 2MN rows for COTAR, 2MN for hybrid and MN otherwise
        """
        kinds = []
        if scheme.has_neighbor_rss:
            kinds.append(RowKind.NEIGHBOR_RSS)
        if scheme.has_toa:
            kinds.append(RowKind.TOA)
        if scheme.has_remote_rss:
            kinds.append(RowKind.REMOTE_RSS)
        return cls.of_kinds(n_targets, n_refs, kinds, scheme)

    @property
    def size(self) -> int:
        return int(self.kind.size)

    def __len__(self) -> int:
        return self.size

    def select(self, keep: np.ndarray) -> 'ObservationLayout':
        """Sub-layout of the rows where `keep` is true (row ids preserved)."""
        keep = np.asarray(keep, dtype=bool)
        return ObservationLayout(self.n_targets, self.n_refs, self.scheme,
                                 _frozen(self.kind[keep]), _frozen(self.i[keep]),
                                 _frozen(self.j[keep]), _frozen(self.row_id[keep]))

    def count(self, kind: RowKind) -> int:
        return int(np.count_nonzero(self.kind == kind))

    def describe(self, row: int) -> str:
        """Human-readable identity of a row, 1-based."""
        kind = RowKind(int(self.kind[row]))
        other = "target" if kind is RowKind.NEIGHBOR_RSS else "reference"
        return f"{kind.label}(target {self.i[row] + 1}, {other} {self.j[row] + 1})"


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=np.int64)
    array.setflags(write=False)
    return array


def row_geometry(pos: PositionVector, layout: ObservationLayout, refs: Optional[ReferenceLayout],
                 warnings: Optional[List[str]] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Coordinate differences and distances for every row.

    Returns:
        (dx, dy, d) where dx = x_i - x_other and other is target j or reference j

    Raises:
        DegenerateGeometryError: a row's two nodes coincide
    """
    neighbor = layout.kind == RowKind.NEIGHBOR_RSS
    other_x = np.empty(layout.size)
    other_y = np.empty(layout.size)
    other_x[neighbor] = pos.x[layout.j[neighbor]]
    other_y[neighbor] = pos.y[layout.j[neighbor]]
    if np.any(~neighbor):
        if refs is None:
            raise ValueError("reference layout required for target-reference rows")
        other_x[~neighbor] = refs.xr[layout.j[~neighbor]]
        other_y[~neighbor] = refs.yr[layout.j[~neighbor]]
    dx = pos.x[layout.i] - other_x
    dy = pos.y[layout.i] - other_y
    d = np.hypot(dx, dy)
    _check_distances(d, layout, warnings)
    return dx, dy, d


def _check_distances(d: np.ndarray, layout: ObservationLayout, warnings: Optional[List[str]]):
    if d.size == 0:
        return
    row = int(np.argmin(d))
    if d[row] < DEGENERATE_DISTANCE:
        kind = RowKind(int(layout.kind[row]))
        other = "target" if kind is RowKind.NEIGHBOR_RSS else "reference"
        pair = (f"target {layout.i[row] + 1}", f"{other} {layout.j[row] + 1}")
        raise DegenerateGeometryError(f"{pair[0]} and {pair[1]} coincide "
                                      f"(distance {d[row]:.3g} m)", pair=pair)
    for row in np.flatnonzero(d < NEAR_DISTANCE):
        text = f"{layout.describe(row)} is only {d[row]:.3g} m long"
        logger.warning(text)
        if warnings is not None:
            warnings.append(text)


def forward_model(pos: PositionVector, layout: ObservationLayout, refs: Optional[ReferenceLayout],
                  params: ChannelParams, phys: PhysConst = PhysConst(),
                  warnings: Optional[List[str]] = None) -> np.ndarray:
    """
    Noise-free value of every row: path loss in dB for RSS rows, seconds for TOA rows.

    Args:
        pos: Target positions
        layout: Rows to evaluate
        refs: Reference nodes
        params: Channel parameters
        phys: Physical constants
        warnings: Optional list collecting near-coincidence warnings

    Returns:
        Length-D vector in layout order
    """
    _, _, d = row_geometry(pos, layout, refs, warnings)
    toa = layout.kind == RowKind.TOA
    values = np.empty(layout.size)
    values[toa] = d[toa] / phys.c
    values[~toa] = 10.0 * params.eta * np.log10(d[~toa]) + params.g0
    return values


def build_covariance(layout: ObservationLayout, params: ChannelParams) -> np.ndarray:
    """Diagonal of the noise covariance: sigma_g^2 on RSS rows, sigma_tau^2 on TOA rows."""
    return np.where(layout.kind == RowKind.TOA, toa_variance(params), rss_variance(params))


def noise_std(layout: ObservationLayout, params: ChannelParams) -> np.ndarray:
    """Unfloored per-row noise std used when drawing measurements."""
    return np.where(layout.kind == RowKind.TOA, params.sigma_tau, params.sigma_g)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Measured values with their layout, presence mask and variances."""
    r: np.ndarray
    mask: np.ndarray  # True = present
    layout: ObservationLayout
    lambda_diag: np.ndarray

    def __post_init__(self):
        for name in ('r', 'mask', 'lambda_diag'):
            array = np.array(getattr(self, name), dtype=bool if name == 'mask' else float)
            if array.shape != (self.layout.size,):
                raise ValueError(f"{name} has shape {array.shape}, expected ({self.layout.size},)")
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if np.any(self.lambda_diag[self.mask] <= 0):
            raise ValueError("variances must be strictly positive on present rows")

    @property
    def active_layout(self) -> ObservationLayout:
        return self.layout.select(self.mask)

    @property
    def active_r(self) -> np.ndarray:
        return self.r[self.mask]

    @property
    def active_lambda(self) -> np.ndarray:
        return self.lambda_diag[self.mask]

    @property
    def n_masked(self) -> int:
        return int(self.mask.size - np.count_nonzero(self.mask))

    def without_mask(self) -> 'ObservationSet':
        """Only the present rows, as a fully unmasked set."""
        return ObservationSet(self.active_r, np.ones(self.mask.sum(), dtype=bool),
                              self.active_layout, self.active_lambda)


def synthesize(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
               params: ChannelParams, p_miss: float, rng: np.random.Generator,
               mask_rng: Optional[np.random.Generator] = None,
               phys: PhysConst = PhysConst()) -> ObservationSet:
    """
    Draw one noisy measurement set.

    Every row gets independent Gaussian noise. Each neighbor RSS row is then
    dropped with probability p_miss; TOA and remote RSS rows are always
    present. Noise and mask draws cover every row so the noise on a row
    does not depend on p_miss.

    Args:
        pos: True target positions
        layout: Rows to synthesize
        refs: Reference nodes
        params: Channel parameters
        p_miss: Probability that a neighbor RSS report is missing
        rng: Random stream for measurement noise
        mask_rng: Random stream for missing reports (defaults to rng)
        phys: Physical constants

    Returns:
        ObservationSet with the drawn values
    """
    if not 0.0 <= p_miss <= 1.0:
        raise ValueError(f"p_miss must be in [0, 1], got {p_miss}")
    f = forward_model(pos, layout, refs, params, phys)
    r = f + rng.standard_normal(layout.size) * noise_std(layout, params)
    draws = (mask_rng if mask_rng is not None else rng).random(layout.size)
    missing = (layout.kind == RowKind.NEIGHBOR_RSS) & (draws < p_miss)
    return ObservationSet(r=r, mask=~missing, layout=layout,
                          lambda_diag=build_covariance(layout, params))


OBSERVATION_COLUMNS = ['row_id', 'kind', 'i', 'j', 'value', 'sigma', 'masked']


def write_observation_csv(obs: ObservationSet, destination: Union[str, Path, IO[str]]):
    """
    Dump an observation set for debugging.

    Values are in native units (dB or seconds); sigma is the row's std in
    the same unit. Masked rows are written with masked=1.
    """
    if isinstance(destination, (str, Path)):
        with open(destination, 'w', newline='', encoding='utf-8') as f:
            write_observation_csv(obs, f)
        return
    writer = csv.writer(destination)
    writer.writerow(OBSERVATION_COLUMNS)
    layout = obs.layout
    for row in range(layout.size):
        writer.writerow([
            int(layout.row_id[row]),
            RowKind(int(layout.kind[row])).label,
            int(layout.i[row]) + 1,
            int(layout.j[row]) + 1,
            repr(float(obs.r[row])),
            repr(float(np.sqrt(obs.lambda_diag[row]))),
            0 if obs.mask[row] else 1,
        ])
