"""
Configuration management for localization experiments.
Parses JSON (or YAML) experiment files into immutable dataclasses and
validates every field, reporting problems by dotted field path.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from channel.model import ChannelCondition, ChannelParams, preset
from scenario.geometry import (ReferenceLayout, Scheme, TargetCluster, centered_anchor,
                               corner_references, default_formation, grid_references)
from simulation.mobility import MobilitySpec
from utils.errors import ConfigError

try:
    import yaml
    YAML_AVAILABLE = True
except ImportError:
    YAML_AVAILABLE = False

logger = logging.getLogger(__name__)

STATIC_POINTS = ("lattice", "center")
MASK_POLICIES = ("delete", "zero")

_TOP_LEVEL_KEYS = {
    "area_side_m", "references", "n_targets", "grid_spacing_m", "formation", "channel",
    "scheme", "iterations", "trials", "seed", "p_missing_rss", "mobility",
    "lattice_pitch_m", "static_points", "mask_policy", "sweep",
}
_CHANNEL_KEYS = {"preset", "condition", "k_factor", "toa_std_ns", "shadow_std_db", "eta", "g0_db",
                 "mean_excess_delay_ns", "bandwidth_mhz"}
_MOBILITY_KEYS = {"speed_kmh", "sample_interval_s", "duration_s", "initial_heading",
                  "heading_change_period_s", "tracks"}
_SWEEP_KEYS = {"n_values", "delta_values", "p_values", "area_sides_m"}


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grids for the sweep commands."""
    n_values: Tuple[int, ...] = (1, 4, 9, 16, 25)
    delta_values: Tuple[float, ...] = (1.0,)
    p_values: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    area_sides_m: Tuple[float, ...] = (5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: scenario, channel, scheme and run controls."""
    area_side_m: float
    references: ReferenceLayout
    n_targets: int = 4
    grid_spacing_m: float = 1.0
    formation: Tuple[Tuple[float, float], ...] = ()
    channel: ChannelParams = field(default_factory=lambda: preset("clear"))
    scheme: Scheme = Scheme.COTAR
    iterations: int = 2
    trials: int = 1000
    seed: int = 0
    p_missing_rss: float = 0.0
    mobility: Optional[MobilitySpec] = None
    lattice_pitch_m: float = 1.0
    static_points: str = "lattice"
    mask_policy: str = "delete"
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def __post_init__(self):
        if not self.formation:
            object.__setattr__(self, 'formation',
                               default_formation(self.n_targets, self.grid_spacing_m))

    @property
    def cluster(self) -> TargetCluster:
        """Target cluster anchored at the square's center."""
        return TargetCluster(self.formation, centered_anchor(self.area_side_m, self.formation))

    def with_cluster(self, n_targets: int, grid_spacing_m: float) -> 'ExperimentConfig':
        """Copy with a square-grid cluster of another size."""
        return replace(self, n_targets=n_targets, grid_spacing_m=grid_spacing_m,
                       formation=default_formation(n_targets, grid_spacing_m))

    def with_overrides(self, **changes) -> 'ExperimentConfig':
        return replace(self, **changes)


class _FieldParser:
    """Collects ConfigErrors instead of stopping at the first one."""

    def __init__(self):
        self.errors: List[ConfigError] = []

    def take(self, parse: Callable[[], Any], default: Any = None) -> Any:
        try:
            return parse()
        except ConfigError as exc:
            self.errors.append(exc)
            return default


def _number(data: Dict[str, Any], key: str, default: Any, path: str,
            integer: bool = False) -> Union[int, float]:
    value = data.get(key, default)
    if value is None:
        raise ConfigError(path, "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ConfigError(path, f"must be an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, f"must be finite, got {value!r}")
    return value


def _warn_unknown(data: Dict[str, Any], known: set, prefix: str = ""):
    for key in sorted(set(data) - known):
        logger.warning("Unknown configuration parameter: %s%s", prefix, key)


def _parse_references(value: Any, side: float) -> ReferenceLayout:
    if value is None or value == "corners":
        return corner_references(side)
    if isinstance(value, dict):
        pitch = _number(value, "grid_pitch_m", None, "references.grid_pitch_m")
        if pitch <= 0:
            raise ConfigError("references.grid_pitch_m", f"must be > 0, got {pitch}")
        return grid_references(side, pitch)
    if isinstance(value, list):
        try:
            points = [(float(x), float(y)) for x, y in value]
        except (TypeError, ValueError):
            raise ConfigError("references", "must be 'corners' or a list of [x, y] pairs") from None
        return ReferenceLayout.from_points(points)
    raise ConfigError("references", f"must be 'corners' or a list of [x, y] pairs, got {value!r}")


def _parse_channel(value: Any) -> ChannelParams:
    if value is None:
        return preset("clear")
    if isinstance(value, str):
        return preset(value)
    if not isinstance(value, dict):
        raise ConfigError("channel", f"must be a preset name or an object, got {value!r}")
    _warn_unknown(value, _CHANNEL_KEYS, "channel.")
    base_name = value.get("preset", value.get("condition", "clear"))
    base = preset("clear" if base_name == ChannelCondition.CUSTOM.value else base_name)
    overrides = {}
    if "k_factor" in value:
        overrides["k_factor"] = _number(value, "k_factor", None, "channel.k_factor")
    if "toa_std_ns" in value:
        overrides["sigma_tau"] = _number(value, "toa_std_ns", None, "channel.toa_std_ns") * 1e-9
    if "shadow_std_db" in value:
        overrides["sigma_g"] = _number(value, "shadow_std_db", None, "channel.shadow_std_db")
    if "eta" in value:
        overrides["eta"] = _number(value, "eta", None, "channel.eta")
    if "g0_db" in value:
        overrides["g0"] = _number(value, "g0_db", None, "channel.g0_db")
    if "mean_excess_delay_ns" in value:
        overrides["mean_excess_delay"] = _number(value, "mean_excess_delay_ns", None,
                                                 "channel.mean_excess_delay_ns") * 1e-9
    if "bandwidth_mhz" in value:
        # informational only
        _number(value, "bandwidth_mhz", None, "channel.bandwidth_mhz")
    params = replace(base, **overrides)
    if params != base:
        params = replace(params, condition=ChannelCondition.CUSTOM)
    return params


def _parse_formation(data: Dict[str, Any], n_targets: int,
                     spacing: float) -> Tuple[Tuple[float, float], ...]:
    value = data.get("formation")
    if value is None:
        return default_formation(n_targets, spacing)
    try:
        formation = tuple((float(dx), float(dy)) for dx, dy in value)
    except (TypeError, ValueError):
        raise ConfigError("formation", "must be a list of [dx, dy] offsets") from None
    if "n_targets" in data and len(formation) != n_targets:
        raise ConfigError("formation", f"has {len(formation)} offsets but n_targets is {n_targets}")
    if not formation:
        raise ConfigError("formation", "must contain at least one offset")
    if len(set(formation)) != len(formation):
        raise ConfigError("formation", "two targets share the same offset")
    return formation


def _parse_mobility(value: Any) -> Optional[MobilitySpec]:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError("mobility", f"must be an object, got {value!r}")
    _warn_unknown(value, _MOBILITY_KEYS, "mobility.")
    heading = value.get("initial_heading", "random")
    if not isinstance(heading, str):
        heading = _number(value, "initial_heading", None, "mobility.initial_heading")
    period = value.get("heading_change_period_s")
    if period is not None:
        period = _number(value, "heading_change_period_s", None, "mobility.heading_change_period_s")
    return MobilitySpec(
        speed_kmh=_number(value, "speed_kmh", None, "mobility.speed_kmh"),
        duration_s=_number(value, "duration_s", None, "mobility.duration_s"),
        sample_interval_s=_number(value, "sample_interval_s", 5.0, "mobility.sample_interval_s"),
        initial_heading=heading,
        heading_change_period_s=period,
        tracks=_number(value, "tracks", 200, "mobility.tracks", integer=True),
    )


def _parse_sweep(value: Any) -> SweepSpec:
    if value is None:
        return SweepSpec()
    if not isinstance(value, dict):
        raise ConfigError("sweep", f"must be an object, got {value!r}")
    _warn_unknown(value, _SWEEP_KEYS, "sweep.")
    defaults = SweepSpec()

    def grid(key: str, cast, check: Callable[[float], bool], rule: str):
        items = value.get(key, getattr(defaults, key))
        if not isinstance(items, (list, tuple)) or not items:
            raise ConfigError(f"sweep.{key}", "must be a non-empty list")
        try:
            items = tuple(cast(item) for item in items)
        except (TypeError, ValueError):
            raise ConfigError(f"sweep.{key}", f"must contain numbers, got {items!r}") from None
        bad = [item for item in items if not check(item)]
        if bad:
            raise ConfigError(f"sweep.{key}", f"values must be {rule}, got {bad}")
        return items

    return SweepSpec(
        n_values=grid("n_values", int, lambda n: n >= 1, ">= 1"),
        delta_values=grid("delta_values", float, lambda d: d > 0, "> 0"),
        p_values=grid("p_values", float, lambda p: 0.0 <= p <= 1.0, "in [0, 1]"),
        area_sides_m=grid("area_sides_m", float, lambda s: s > 0, "> 0"),
    )


def _choice(data: Dict[str, Any], key: str, options: Tuple[str, ...]) -> str:
    value = data.get(key, options[0])
    if value not in options:
        raise ConfigError(key, f"must be one of {list(options)}, got {value!r}")
    return value


def _collect(data: Dict[str, Any]) -> Tuple[Optional[ExperimentConfig], List[ConfigError]]:
    if not isinstance(data, dict):
        return None, [ConfigError("-", "configuration must be a JSON object")]
    _warn_unknown(data, _TOP_LEVEL_KEYS)
    parser = _FieldParser()

    def area_side():
        side = _number(data, "area_side_m", None, "area_side_m")
        if side <= 0:
            raise ConfigError("area_side_m", f"must be > 0, got {side}")
        return side

    def n_targets():
        if "n_targets" not in data and isinstance(data.get("formation"), list):
            return len(data["formation"])
        n = _number(data, "n_targets", 4, "n_targets", integer=True)
        if n < 1:
            raise ConfigError("n_targets", f"must be >= 1, got {n}")
        return n

    def spacing():
        delta = _number(data, "grid_spacing_m", 1.0, "grid_spacing_m")
        if delta <= 0:
            raise ConfigError("grid_spacing_m", f"must be > 0, got {delta}")
        return delta

    def bounded(key: str, default, low, high=None, integer=False):
        def parse():
            value = _number(data, key, default, key, integer=integer)
            if value < low or (high is not None and value > high):
                rule = f">= {low}" if high is None else f"in [{low}, {high}]"
                raise ConfigError(key, f"must be {rule}, got {value}")
            return value
        return parse

    side = parser.take(area_side)
    n = parser.take(n_targets, 1)
    delta = parser.take(spacing, 1.0)
    references = parser.take(lambda: _parse_references(data.get("references"), side)) \
        if side is not None or isinstance(data.get("references"), list) else None
    formation = parser.take(lambda: _parse_formation(data, n, delta))
    channel = parser.take(lambda: _parse_channel(data.get("channel")))
    scheme = parser.take(lambda: Scheme.parse(data.get("scheme", "cotar")))
    iterations = parser.take(bounded("iterations", 2, 1, integer=True))
    trials = parser.take(bounded("trials", 1000, 1, integer=True))
    seed = parser.take(bounded("seed", 0, 0, integer=True))
    p_miss = parser.take(bounded("p_missing_rss", 0.0, 0.0, 1.0))
    mobility = parser.take(lambda: _parse_mobility(data.get("mobility")))
    pitch = parser.take(bounded("lattice_pitch_m", 1.0, 1e-9))
    static_points = parser.take(lambda: _choice(data, "static_points", STATIC_POINTS))
    mask_policy = parser.take(lambda: _choice(data, "mask_policy", MASK_POLICIES))
    sweep = parser.take(lambda: _parse_sweep(data.get("sweep")))

    if parser.errors or side is None or references is None:
        return None, parser.errors
    config = ExperimentConfig(
        area_side_m=side, references=references, n_targets=len(formation),
        grid_spacing_m=delta, formation=formation, channel=channel, scheme=scheme,
        iterations=iterations, trials=trials, seed=seed, p_missing_rss=p_miss,
        mobility=mobility, lattice_pitch_m=pitch, static_points=static_points,
        mask_policy=mask_policy, sweep=sweep,
    )
    return config, []


def validate_config(data: Dict[str, Any]) -> List[ConfigError]:
    """
    Validate a raw configuration mapping.

    Args:
        data: Parsed JSON/YAML document

    Returns:
        List of validation errors (empty if valid)
    """
    return _collect(data)[1]


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Build an ExperimentConfig, raising the first validation error."""
    config, errors = _collect(data)
    if errors:
        raise errors[0]
    return config


def read_config_data(config_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a configuration file without interpreting it.

    Args:
        config_path: Path to a .json, .yaml or .yml file

    Returns:
        The parsed document
    """
    config_file = Path(config_path)
    if not config_file.exists():
        raise ConfigError("config", f"configuration file not found: {config_path}")

    suffix = config_file.suffix.lower()
    try:
        if suffix in ('.yaml', '.yml'):
            if not YAML_AVAILABLE:
                raise ConfigError("config", "PyYAML is required for YAML configuration files. "
                                            "Install with: pip install pyyaml")
            with open(config_file, 'r', encoding='utf-8') as f:
                return yaml.safe_load(f)
        with open(config_file, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    except UnicodeDecodeError as exc:
        raise ConfigError("config", f"file is not UTF-8: {exc.reason}") from None
    except Exception as exc:
        if YAML_AVAILABLE and isinstance(exc, yaml.YAMLError):
            raise ConfigError("config", f"invalid YAML: {exc}") from None
        raise


def load_config(config_path: Union[str, Path]) -> ExperimentConfig:
    """
    Load and validate an experiment configuration.

    Args:
        config_path: Path to configuration file (JSON, or YAML with PyYAML)

    Returns:
        Validated ExperimentConfig with defaults applied
    """
    config = config_from_dict(read_config_data(config_path))
    logger.debug("Loaded configuration from %s", config_path)
    return config


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    """Resolved configuration as a JSON-ready mapping (config echo)."""
    channel = config.channel
    data: Dict[str, Any] = {
        "area_side_m": config.area_side_m,
        "references": [[float(x), float(y)] for x, y in config.references.points()],
        "n_targets": config.n_targets,
        "grid_spacing_m": config.grid_spacing_m,
        "formation": [list(offset) for offset in config.formation],
        "channel": {
            "condition": channel.condition.value,
            "eta": channel.eta,
            "g0_db": channel.g0,
            "shadow_std_db": channel.sigma_g,
            "toa_std_ns": channel.sigma_tau * 1e9,
            "k_factor": channel.k_factor,
            "mean_excess_delay_ns": channel.mean_excess_delay * 1e9,
        },
        "scheme": config.scheme.value,
        "iterations": config.iterations,
        "trials": config.trials,
        "seed": config.seed,
        "p_missing_rss": config.p_missing_rss,
        "lattice_pitch_m": config.lattice_pitch_m,
        "static_points": config.static_points,
        "mask_policy": config.mask_policy,
        "sweep": {
            "n_values": list(config.sweep.n_values),
            "delta_values": list(config.sweep.delta_values),
            "p_values": list(config.sweep.p_values),
            "area_sides_m": list(config.sweep.area_sides_m),
        },
    }
    if config.mobility is not None:
        mobility = config.mobility
        data["mobility"] = {
            "speed_kmh": mobility.speed_kmh,
            "sample_interval_s": mobility.sample_interval_s,
            "duration_s": mobility.duration_s,
            "initial_heading": mobility.initial_heading,
            "heading_change_period_s": mobility.heading_change_period_s,
            "tracks": mobility.tracks,
        }
    return data


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of the resolved configuration."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def save_config(config: ExperimentConfig, config_path: Union[str, Path], format: str = 'json'):
    """
    Save a resolved configuration to file.

    Args:
        config: Configuration to save
        config_path: Destination path
        format: File format ('json' or 'yaml')
    """
    config_data = config_to_dict(config)
    config_file = Path(config_path)
    config_file.parent.mkdir(parents=True, exist_ok=True)

    if format.lower() in ['yaml', 'yml']:
        if not YAML_AVAILABLE:
            raise ImportError("PyYAML is required for YAML output. Install with: pip install pyyaml")
        with open(config_file, 'w', encoding='utf-8') as f:
            yaml.safe_dump(config_data, f, default_flow_style=False, indent=2)
    elif format.lower() == 'json':
        with open(config_file, 'w', encoding='utf-8') as f:
            json.dump(config_data, f, indent=2)
    else:
        raise ValueError("Format must be 'yaml' or 'json'")
