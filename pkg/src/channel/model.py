"""
Path-loss and measurement-error models.
Deterministic means and Gaussian noise for RSS (dB) and TOA (seconds).

Internal units are meters and seconds; nanoseconds appear only in configs
and reports.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

import numpy as np

from utils.errors import ConfigError, DegenerateGeometryError

ArrayLike = Union[float, np.ndarray]

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

# Floors keeping the covariance positive definite for noiseless channels
RSS_VARIANCE_FLOOR = 1e-12  # dB^2, i.e. (1e-6 dB)^2
TOA_VARIANCE_FLOOR = 1e-30  # s^2, i.e. (1e-15 s)^2


@dataclass(frozen=True)
class PhysConst:
    """Physical constants used by the forward model."""
    c: float = SPEED_OF_LIGHT  # m/s


class ChannelCondition(Enum):
    """Named propagation environments."""
    CLEAR = "clear"
    OBSTRUCTED = "obstructed"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ChannelParams:
    """Propagation parameters for a single run (one condition for every link)."""
    eta: float = 3.086                 # path-loss exponent
    g0: float = 0.0                    # dB calibration loss
    sigma_g: float = 8.0               # dB shadowing std
    sigma_tau: float = 8.8e-9          # s TOA-error std
    k_factor: float = 5.0              # Rician K (informational)
    mean_excess_delay: float = 25.8e-9  # s (informational)
    condition: ChannelCondition = ChannelCondition.CLEAR

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ConfigError("channel.eta", f"path-loss exponent must be > 0, got {self.eta}")
        if not np.isfinite(self.sigma_g) or self.sigma_g < 0:
            raise ConfigError("channel.shadow_std_db", f"must be >= 0, got {self.sigma_g}")
        if not np.isfinite(self.sigma_tau) or self.sigma_tau < 0:
            raise ConfigError("channel.toa_std_ns", f"must be >= 0, got {self.sigma_tau}")

    @property
    def alpha_prime(self) -> float:
        """Slope of the mean path loss w.r.t. ln(d): 10*eta/ln(10) dB."""
        return 10.0 * self.eta / np.log(10.0)

    def with_noise(self, sigma_g: float, sigma_tau: float) -> 'ChannelParams':
        """Copy with different noise levels (same condition label)."""
        return replace(self, sigma_g=sigma_g, sigma_tau=sigma_tau)


# Clear line-of-sight and heavily obstructed environments
CLEAR = ChannelParams(sigma_tau=8.8e-9, k_factor=5.0, mean_excess_delay=25.8e-9,
                      condition=ChannelCondition.CLEAR)
OBSTRUCTED = ChannelParams(sigma_tau=40.2e-9, k_factor=2.0, mean_excess_delay=76.9e-9,
                           condition=ChannelCondition.OBSTRUCTED)

_PRESETS = {
    ChannelCondition.CLEAR.value: CLEAR,
    ChannelCondition.OBSTRUCTED.value: OBSTRUCTED,
}


def preset(name: str) -> ChannelParams:
    """
    Look up a named channel preset.

    Args:
        name: 'clear' or 'obstructed' (case-insensitive)

    Returns:
        The preset ChannelParams
    """
    try:
        return _PRESETS[name.lower()]
    except (KeyError, AttributeError):
        raise ConfigError("channel", f"unknown channel preset {name!r}; "
                                     f"expected one of {sorted(_PRESETS)}") from None


def _check_positive(d: ArrayLike) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise DegenerateGeometryError(f"distance must be > 0 (coincident nodes), got {d.min()!r}")
    return d


def _as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def mean_path_loss_db(d: ArrayLike, params: ChannelParams) -> ArrayLike:
    """Average path loss 10*eta*log10(d) + g0 in dB."""
    d = _check_positive(d)
    return _as_output(10.0 * params.eta * np.log10(d) + params.g0)


def sample_path_loss_db(d: ArrayLike, params: ChannelParams,
                        rng: np.random.Generator) -> ArrayLike:
    """Path loss with log-normal shadowing: mean + N(0, sigma_g^2)."""
    mean = np.asarray(mean_path_loss_db(d, params))
    return _as_output(mean + rng.normal(0.0, params.sigma_g, size=mean.shape))


def rss_distance_std(d: ArrayLike, params: ChannelParams) -> ArrayLike:
    """Std of an RSS-based distance estimate: ln(10)*sigma_g*d/(10*eta) meters."""
    d = _check_positive(d)
    return _as_output(np.log(10.0) * params.sigma_g * d / (10.0 * params.eta))


def sample_toa(d: ArrayLike, params: ChannelParams, rng: np.random.Generator,
               phys: PhysConst = PhysConst()) -> ArrayLike:
    """Noisy time of arrival d/c + N(0, sigma_tau^2) in seconds."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise DegenerateGeometryError(f"distance must be >= 0, got {d.min()!r}")
    return _as_output(d / phys.c + rng.normal(0.0, params.sigma_tau, size=d.shape))


def toa_distance_std(params: ChannelParams, phys: PhysConst = PhysConst()) -> float:
    """Distance-equivalent TOA error std c*sigma_tau in meters."""
    return phys.c * params.sigma_tau


def rss_variance(params: ChannelParams) -> float:
    """Per-row RSS variance in dB^2 (floored)."""
    return max(params.sigma_g ** 2, RSS_VARIANCE_FLOOR)


def toa_variance(params: ChannelParams) -> float:
    """Per-row TOA variance in s^2 (floored)."""
    return max(params.sigma_tau ** 2, TOA_VARIANCE_FLOOR)
