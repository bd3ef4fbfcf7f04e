"""
Scenario geometry: target positions, reference layouts, rigid target
clusters and the localization schemes.
All types are immutable once built; coordinates are meters in 2-D.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from utils.errors import ConfigError

MIN_REFERENCES = 3
_COINCIDENCE_TOL = 1e-9  # meters


def _frozen(values: Sequence[float]) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


class Scheme(Enum):
    """Localization strategies compared by the simulator."""
    RSS_ONLY = "rss_only"
    TOA_ONLY = "toa_only"
    HYBRID = "hybrid"
    COTAR = "cotar"

    @classmethod
    def parse(cls, text: str) -> 'Scheme':
        """Parse a scheme name; accepts 'toa-only', 'TOA_ONLY', 'hybrid_toa_rss' etc."""
        key = str(text).strip().lower().replace('-', '_')
        aliases = {'rss': cls.RSS_ONLY, 'toa': cls.TOA_ONLY, 'hybrid_toa_rss': cls.HYBRID}
        if key in aliases:
            return aliases[key]
        for scheme in cls:
            if scheme.value == key:
                return scheme
        raise ConfigError("scheme", f"unknown scheme {text!r}; expected one of "
                                    f"{[s.value for s in cls]}")

    @property
    def has_neighbor_rss(self) -> bool:
        return self is Scheme.COTAR

    @property
    def has_toa(self) -> bool:
        return self in (Scheme.TOA_ONLY, Scheme.HYBRID, Scheme.COTAR)

    @property
    def has_remote_rss(self) -> bool:
        return self in (Scheme.RSS_ONLY, Scheme.HYBRID, Scheme.COTAR)


@dataclass(frozen=True)
class PositionVector:
    """Stacked coordinates of N target nodes: x[0..N-1], y[0..N-1]."""
    x: np.ndarray
    y: np.ndarray

    def __init__(self, x: Sequence[float], y: Sequence[float]):
        x_arr, y_arr = _frozen(x), _frozen(y)
        if x_arr.size != y_arr.size:
            raise ValueError(f"x and y lengths differ: {x_arr.size} vs {y_arr.size}")
        if x_arr.size < 1:
            raise ValueError("a position vector needs at least one node")
        if not (np.all(np.isfinite(x_arr)) and np.all(np.isfinite(y_arr))):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, 'x', x_arr)
        object.__setattr__(self, 'y', y_arr)

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> 'PositionVector':
        """Build from the stacked 2N column (x-coordinates first)."""
        vector = np.asarray(vector, dtype=float).reshape(-1)
        n = vector.size // 2
        return cls(vector[:n], vector[n:])

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, float]]) -> 'PositionVector':
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(points[:, 0], points[:, 1])

    @property
    def n(self) -> int:
        return int(self.x.size)

    def as_vector(self) -> np.ndarray:
        """Stacked (x, y) column of length 2N."""
        return np.concatenate([self.x, self.y])

    def points(self) -> np.ndarray:
        """N x 2 array of (x, y) rows."""
        return np.column_stack([self.x, self.y])

    def translated(self, dx: float, dy: float) -> 'PositionVector':
        return PositionVector(self.x + dx, self.y + dy)

    def centroid(self) -> Tuple[float, float]:
        return float(self.x.mean()), float(self.y.mean())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PositionVector):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes()))


@dataclass(frozen=True)
class ReferenceLayout:
    """Reference (anchor) nodes with known coordinates."""
    xr: np.ndarray
    yr: np.ndarray

    def __init__(self, xr: Sequence[float], yr: Sequence[float]):
        xr_arr, yr_arr = _frozen(xr), _frozen(yr)
        if xr_arr.size != yr_arr.size:
            raise ConfigError("references", f"xr and yr lengths differ: {xr_arr.size} vs {yr_arr.size}")
        if xr_arr.size < MIN_REFERENCES:
            raise ConfigError("references", f"reference count below minimum {MIN_REFERENCES}")
        if not (np.all(np.isfinite(xr_arr)) and np.all(np.isfinite(yr_arr))):
            raise ConfigError("references", "reference coordinates must be finite")
        points = np.column_stack([xr_arr, yr_arr])
        for j in range(len(points)):
            gaps = np.hypot(*(points[j + 1:] - points[j]).T)
            if np.any(gaps < _COINCIDENCE_TOL):
                k = j + 1 + int(np.argmin(gaps))
                raise ConfigError("references", f"reference nodes {j} and {k} coincide")
        object.__setattr__(self, 'xr', xr_arr)
        object.__setattr__(self, 'yr', yr_arr)

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, float]]) -> 'ReferenceLayout':
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(points[:, 0], points[:, 1])

    @property
    def m(self) -> int:
        return int(self.xr.size)

    def points(self) -> np.ndarray:
        return np.column_stack([self.xr, self.yr])

    def translated(self, dx: float, dy: float) -> 'ReferenceLayout':
        return ReferenceLayout(self.xr + dx, self.yr + dy)

    def bounding_box(self) -> Tuple[float, float, float, float]:
        """(min_x, max_x, min_y, max_y) of the reference nodes."""
        return (float(self.xr.min()), float(self.xr.max()),
                float(self.yr.min()), float(self.yr.max()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReferenceLayout):
            return NotImplemented
        return np.array_equal(self.xr, other.xr) and np.array_equal(self.yr, other.yr)

    def __hash__(self):
        return hash((self.xr.tobytes(), self.yr.tobytes()))


@dataclass(frozen=True)
class TargetCluster:
    """
    A rigid group of target nodes.

    Absolute node positions are anchor + formation offset; the formation
    never changes during a run, only the anchor moves.
    """
    formation: Tuple[Tuple[float, float], ...]
    anchor: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        formation = tuple((float(dx), float(dy)) for dx, dy in self.formation)
        if not formation:
            raise ValueError("a cluster needs at least one node")
        object.__setattr__(self, 'formation', formation)
        object.__setattr__(self, 'anchor', (float(self.anchor[0]), float(self.anchor[1])))

    @property
    def n(self) -> int:
        return len(self.formation)

    @property
    def extent(self) -> Tuple[float, float]:
        """Width and height of the formation's bounding box."""
        offsets = np.asarray(self.formation)
        return (float(np.ptp(offsets[:, 0])), float(np.ptp(offsets[:, 1])))

    @property
    def offset_bounds(self) -> Tuple[float, float, float, float]:
        """(min_dx, max_dx, min_dy, max_dy) over the formation offsets."""
        offsets = np.asarray(self.formation)
        return (float(offsets[:, 0].min()), float(offsets[:, 0].max()),
                float(offsets[:, 1].min()), float(offsets[:, 1].max()))

    def anchor_range(self, side: float) -> Tuple[float, float, float, float]:
        """(x_lo, x_hi, y_lo, y_hi) of anchors that keep every node inside the square."""
        min_dx, max_dx, min_dy, max_dy = self.offset_bounds
        return (-min_dx, side - max_dx, -min_dy, side - max_dy)

    def moved_to(self, anchor: Tuple[float, float]) -> 'TargetCluster':
        return TargetCluster(self.formation, anchor)


def cluster_positions(cluster: TargetCluster) -> PositionVector:
    """Absolute node positions, in formation order."""
    offsets = np.asarray(cluster.formation, dtype=float)
    return PositionVector(offsets[:, 0] + cluster.anchor[0], offsets[:, 1] + cluster.anchor[1])


def default_formation(n_targets: int, spacing: float) -> Tuple[Tuple[float, float], ...]:
    """
    Square-grid formation with the given spacing.

    A perfect-square N gives a sqrt(N) x sqrt(N) grid; any other N fills the
    smallest enclosing grid row by row.
    """
    if n_targets < 1:
        raise ConfigError("n_targets", f"must be >= 1, got {n_targets}")
    cols = math.isqrt(n_targets)
    if cols * cols != n_targets:
        cols += 1
    return tuple((float((k % cols) * spacing), float((k // cols) * spacing))
                 for k in range(n_targets))


def corner_references(side: float) -> ReferenceLayout:
    """Four references at the corners of the side x side square."""
    return ReferenceLayout.from_points([(0.0, 0.0), (side, 0.0), (0.0, side), (side, side)])


def grid_references(side: float, pitch: float) -> ReferenceLayout:
    """References every `pitch` meters over the square, corners included."""
    ticks = np.arange(0.0, side + pitch / 2.0, pitch)
    return ReferenceLayout.from_points([(x, y) for y in ticks for x in ticks])


def centered_anchor(side: float, formation: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Anchor that puts the formation's bounding box at the square's center."""
    x_lo, x_hi, y_lo, y_hi = TargetCluster(tuple(formation)).anchor_range(side)
    return ((x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0)


def reference_clearance(cluster: TargetCluster, refs: ReferenceLayout) -> float:
    """Smallest distance between any node of the cluster and any reference."""
    nodes = cluster_positions(cluster)
    return float(np.hypot(nodes.x[:, None] - refs.xr[None, :],
                          nodes.y[:, None] - refs.yr[None, :]).min())


def anchor_lattice(side: float, pitch: float,
                   formation: Sequence[Tuple[float, float]]) -> np.ndarray:
    """
    Cell-centred anchor lattice over the square.

    The formation's bounding box starts at pitch/2 + k*pitch, and anchors are
    kept only while the whole cluster stays at least pitch/2 inside the far
    edge. Falls back to the centred anchor when no lattice point fits.

    Returns:
        K x 2 array of anchors, x varying fastest
    """
    if pitch <= 0:
        raise ConfigError("lattice_pitch_m", f"must be > 0, got {pitch}")
    cluster = TargetCluster(tuple(formation))
    width, height = cluster.extent
    min_dx, _, min_dy, _ = cluster.offset_bounds
    xs = _lattice_ticks(side, pitch, width) - min_dx
    ys = _lattice_ticks(side, pitch, height) - min_dy
    if xs.size == 0 or ys.size == 0:
        return np.array([centered_anchor(side, formation)])
    grid_x, grid_y = np.meshgrid(xs, ys)
    return np.column_stack([grid_x.ravel(), grid_y.ravel()])


def _lattice_ticks(side: float, pitch: float, width: float) -> np.ndarray:
    ticks: List[float] = []
    tick = pitch / 2.0
    while tick + width <= side - pitch / 2.0 + 1e-9:
        ticks.append(tick)
        tick += pitch
    return np.asarray(ticks)
