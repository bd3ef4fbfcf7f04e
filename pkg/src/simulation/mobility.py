"""
Mobility model for tracking runs.
The cluster anchor travels in straight lines at constant speed and bounces
off the square's walls like a ray of light.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from utils.errors import ConfigError

KMH_TO_MS = 1000.0 / 3600.0


@dataclass(frozen=True)
class MobilitySpec:
    """Motion of the target cluster during a tracking run."""
    speed_kmh: float
    duration_s: float
    sample_interval_s: float = 5.0
    initial_heading: Union[float, str] = "random"  # radians or "random"
    heading_change_period_s: Optional[float] = None  # None = fixed heading between wall hits
    tracks: int = 200

    def __post_init__(self):
        if not math.isfinite(self.speed_kmh) or self.speed_kmh < 0:
            raise ConfigError("mobility.speed_kmh", f"must be >= 0, got {self.speed_kmh}")
        if not self.sample_interval_s > 0:
            raise ConfigError("mobility.sample_interval_s", f"must be > 0, got {self.sample_interval_s}")
        if not self.sample_interval_s <= self.duration_s:
            raise ConfigError("mobility.duration_s",
                              f"must be >= sample interval {self.sample_interval_s}, got {self.duration_s}")
        if self.heading_change_period_s is not None and not self.heading_change_period_s > 0:
            raise ConfigError("mobility.heading_change_period_s",
                              f"must be > 0 when set, got {self.heading_change_period_s}")
        if self.tracks < 1:
            raise ConfigError("mobility.tracks", f"must be >= 1, got {self.tracks}")
        if isinstance(self.initial_heading, str) and self.initial_heading != "random":
            raise ConfigError("mobility.initial_heading",
                              f"must be a number of radians or 'random', got {self.initial_heading!r}")

    @property
    def speed_ms(self) -> float:
        return self.speed_kmh * KMH_TO_MS

    @property
    def n_samples(self) -> int:
        """Localization instants, the first one at t=0."""
        return int(math.floor(self.duration_s / self.sample_interval_s + 1e-9)) + 1


def reflect(position: float, velocity: float, low: float, high: float) -> Tuple[float, float]:
    """
    Fold a 1-D coordinate back into [low, high] by specular reflection.

    Returns:
        (position, velocity) with the velocity sign flipped once per wall hit
    """
    span = high - low
    if span <= 0:
        return low, velocity
    offset = position - low
    period = 2.0 * span
    offset = math.fmod(offset, period)
    if offset < 0:
        offset += period
    # Number of wall hits decides the travel direction
    hits = math.floor((position - low) / span)
    if offset > span:
        offset = period - offset
    if hits % 2 != 0:
        velocity = -velocity
    return low + offset, velocity


class ReflectingWalker:
    """
    Moves an anchor point inside an axis-aligned box with wall reflection.

    Speed is preserved exactly; only the velocity components' signs change
    at the walls. The heading optionally re-randomizes every
    `heading_change_period_s` seconds.
    """

    def __init__(self, start: Tuple[float, float], heading: float, speed_ms: float,
                 bounds: Tuple[float, float, float, float],
                 rng: np.random.Generator,
                 heading_change_period_s: Optional[float] = None):
        """
        Args:
            start: Initial anchor (x, y) in meters
            heading: Initial heading in radians
            speed_ms: Speed in m/s
            bounds: (min_x, max_x, min_y, max_y) the anchor must stay within
            rng: Random stream for heading changes
            heading_change_period_s: Optional heading re-randomization period
        """
        self.bounds = bounds
        self.position = np.array(start, dtype=float)
        self.velocity = speed_ms * np.array([math.cos(heading), math.sin(heading)])
        self.speed_ms = speed_ms
        self.rng = rng
        self.heading_change_period_s = heading_change_period_s
        self._since_change = 0.0

    def advance(self, dt: float) -> Tuple[float, float]:
        """Move for dt seconds and return the new anchor."""
        remaining = dt
        period = self.heading_change_period_s
        while remaining > 0:
            step = remaining if period is None else min(remaining, period - self._since_change)
            self._move(step)
            remaining -= step
            if period is not None:
                self._since_change += step
                if self._since_change >= period - 1e-12:
                    heading = self.rng.uniform(0.0, 2.0 * math.pi)
                    self.velocity = self.speed_ms * np.array([math.cos(heading), math.sin(heading)])
                    self._since_change = 0.0
        return float(self.position[0]), float(self.position[1])

    def _move(self, dt: float):
        min_x, max_x, min_y, max_y = self.bounds
        x, vx = reflect(self.position[0] + self.velocity[0] * dt, self.velocity[0], min_x, max_x)
        y, vy = reflect(self.position[1] + self.velocity[1] * dt, self.velocity[1], min_y, max_y)
        self.position = np.array([x, y])
        self.velocity = np.array([vx, vy])
