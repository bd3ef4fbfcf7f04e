"""
Monte-Carlo experiment drivers.

Static sweeps over a lattice of cluster positions, cooperation-count and
missing-RSS sweeps at the scenario center, mobile tracking with wall
reflection, and the analytic bounds maps.

Every (point, trial) or (track, step) draws from its own seeded substream
and results are merged in key order, so a run replays bit-identically
whatever the number of workers.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from localization.bounds import AreaRow, GridRow, area_sweep, crb_map, crb_stds, fisher, rms_bound
from localization.estimator import MaskPolicy, solve
from localization.observation import NEAR_DISTANCE, ObservationLayout, synthesize
from scenario.geometry import (PositionVector, Scheme, TargetCluster, anchor_lattice,
                               centered_anchor, cluster_positions, reference_clearance)
from utils.config import ExperimentConfig
from utils.errors import ConfigError, LocalizationError
from .mobility import ReflectingWalker
from .records import TrialRecord, rms_error

logger = logging.getLogger(__name__)

TRIAL_CHUNK = 50  # trials per work item
REFERENCE_CLEARANCE = NEAR_DISTANCE  # meters


def trial_streams(seed: int, *key: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent (noise, mask) generators for one work key."""
    noise, mask = np.random.SeedSequence([seed, *key]).spawn(2)
    return np.random.default_rng(noise), np.random.default_rng(mask)


def _ordered_map(func: Callable, items: Sequence, workers: int) -> Iterator:
    """Map in input order, in worker processes when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        yield from map(func, items)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(func, items)


def center_anchor(cfg: ExperimentConfig) -> Tuple[float, float]:
    """
    Anchor of the cluster at the scenario center.

    When a node would sit on a reference, the nearest lattice anchor that
    keeps every node at least REFERENCE_CLEARANCE from the references is
    used instead.

    Raises:
        ConfigError: no lattice anchor clears the references
    """
    anchor = centered_anchor(cfg.area_side_m, cfg.formation)
    cluster = TargetCluster(cfg.formation)
    if reference_clearance(cluster.moved_to(anchor), cfg.references) >= REFERENCE_CLEARANCE:
        return anchor
    candidates = [(float(x), float(y))
                  for x, y in anchor_lattice(cfg.area_side_m, cfg.lattice_pitch_m, cfg.formation)
                  if reference_clearance(cluster.moved_to((x, y)), cfg.references)
                  >= REFERENCE_CLEARANCE]
    if not candidates:
        raise ConfigError("references", "no cluster position clears the references")
    moved = min(candidates,
                key=lambda point: math.hypot(point[0] - anchor[0], point[1] - anchor[1]))
    logger.warning("Center cluster sits on a reference; using anchor (%.3f, %.3f) instead",
                   *moved)
    return moved


def center_start(cfg: ExperimentConfig) -> PositionVector:
    """Cold-start positions: the cluster at center_anchor."""
    return cluster_positions(TargetCluster(cfg.formation, center_anchor(cfg)))


def static_anchors(cfg: ExperimentConfig) -> np.ndarray:
    """Cluster anchors visited by a static run."""
    if cfg.static_points == "center":
        return np.array([center_anchor(cfg)])
    return anchor_lattice(cfg.area_side_m, cfg.lattice_pitch_m, cfg.formation)


@dataclass(frozen=True)
class PointResult:
    """Aggregate over the trials at one cluster position."""
    index: int
    x: float  # cluster centroid
    y: float
    rms: float
    eps: float
    crb: float
    trials: int
    failures: int

    @property
    def gap(self) -> float:
        """Sample RMS minus the RMS bound."""
        return self.rms - self.eps


@dataclass
class StaticResult:
    points: List[PointResult]
    records: List[TrialRecord] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return sum(point.trials for point in self.points)

    @property
    def failures(self) -> int:
        return sum(point.failures for point in self.points)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def max_gap(self) -> float:
        gaps = [point.gap for point in self.points if math.isfinite(point.gap)]
        return max(gaps) if gaps else math.nan

    def nearest(self, x: float, y: float) -> PointResult:
        """Point whose cluster centroid is closest to (x, y)."""
        return min(self.points, key=lambda point: math.hypot(point.x - x, point.y - y))

    def summary(self) -> Dict[str, Any]:
        finite = [point.rms for point in self.points if math.isfinite(point.rms)]
        return {
            'points': len(self.points),
            'trials': self.trials,
            'failures': self.failures,
            'failure_rate': self.failure_rate,
            'mean_point_rms_m': float(np.mean(finite)) if finite else math.nan,
            'max_gap_m': self.max_gap,
        }


StaticTask = Tuple[ExperimentConfig, int, Tuple[float, float], int, int, PositionVector]


def _run_static_chunk(task: StaticTask) -> List[TrialRecord]:
    cfg, index, anchor, start, stop, init = task
    truth = cluster_positions(TargetCluster(cfg.formation, anchor))
    layout = ObservationLayout.build(truth.n, cfg.references.m, cfg.scheme)
    policy = MaskPolicy(cfg.mask_policy)
    records = []
    for trial in range(start, stop):
        noise_rng, mask_rng = trial_streams(cfg.seed, index, trial)
        try:
            obs = synthesize(truth, layout, cfg.references, cfg.channel, cfg.p_missing_rss,
                             noise_rng, mask_rng)
            report = solve(init, obs, cfg.references, cfg.channel, cfg.iterations,
                           cfg.area_side_m, policy)
        except LocalizationError as exc:
            logger.debug("point %d trial %d failed: %s", index, trial, exc)
            records.append(TrialRecord(trial, index, truth, None, 0, failure=str(exc)))
            continue
        records.append(TrialRecord(trial, index, truth, report.final.positions,
                                   report.final.iteration))
    return records


def _point_bounds(cfg: ExperimentConfig, truth: PositionVector) -> Tuple[float, float]:
    """(eps, mean CRB) at a truth, NaN when the geometry is degenerate."""
    layout = ObservationLayout.build(truth.n, cfg.references.m, cfg.scheme)
    try:
        eps = rms_bound(truth, layout, cfg.references, cfg.channel)
        crb = float(np.mean(crb_stds(fisher(truth, layout, cfg.references, cfg.channel))))
    except LocalizationError:
        return math.nan, math.nan
    return eps, crb


def run_static(cfg: ExperimentConfig, workers: int = 1, keep_records: bool = True) -> StaticResult:
    """
    Localize the cluster repeatedly at every static point.

    Each trial synthesizes measurements at the truth and solves from the
    scenario center with cfg.iterations steps. Failed trials are counted
    and excluded from the RMS.

    Args:
        cfg: Experiment configuration
        workers: Worker processes (1 = in-process)
        keep_records: Keep per-trial records in the result

    Returns:
        StaticResult with one PointResult per point
    """
    anchors = static_anchors(cfg)
    init = center_start(cfg)
    tasks = [(cfg, index, (float(anchor[0]), float(anchor[1])), start,
              min(start + TRIAL_CHUNK, cfg.trials), init)
             for index, anchor in enumerate(anchors)
             for start in range(0, cfg.trials, TRIAL_CHUNK)]

    per_point: Dict[int, List[TrialRecord]] = {}
    for chunk in _ordered_map(_run_static_chunk, tasks, workers):
        if chunk:
            per_point.setdefault(chunk[0].step, []).extend(chunk)

    result = StaticResult(points=[])
    for index in range(len(anchors)):
        records = per_point.get(index, [])
        truth = records[0].truth
        eps, crb = _point_bounds(cfg, truth)
        cx, cy = truth.centroid()
        failures = sum(1 for record in records if not record.ok)
        result.points.append(PointResult(index, cx, cy, rms_error(records), eps, crb,
                                         len(records), failures))
        if keep_records:
            result.records.extend(records)

    logger.info("Static run: %d points x %d trials, %d failures (%.3f%%)",
                len(result.points), cfg.trials, result.failures, 100.0 * result.failure_rate)
    return result


@dataclass(frozen=True)
class CooperationRow:
    n_targets: int
    delta_m: float
    eps_m: float
    crb_m: float
    rms_m: float
    trials: int
    failures: int


def run_cooperation_sweep(cfg: ExperimentConfig, n_values: Optional[Iterable[int]] = None,
                          delta_values: Optional[Iterable[float]] = None,
                          workers: int = 1) -> List[CooperationRow]:
    """
    Bounds and Monte-Carlo RMS at the scenario center per (N, grid spacing).

    Defaults to the config's sweep grids.
    """
    n_values = tuple(n_values if n_values is not None else cfg.sweep.n_values)
    delta_values = tuple(delta_values if delta_values is not None else cfg.sweep.delta_values)
    rows = []
    for delta in delta_values:
        for n_targets in n_values:
            point_cfg = replace(cfg.with_cluster(n_targets, delta), static_points="center")
            point = run_static(point_cfg, workers, keep_records=False).points[0]
            rows.append(CooperationRow(n_targets, float(delta), point.eps, point.crb, point.rms,
                                       point.trials, point.failures))
            logger.info("N=%d delta=%.2f m: eps %.3f m, RMS %.3f m",
                        n_targets, delta, point.eps, point.rms)
    return rows


@dataclass(frozen=True)
class MissingRssRow:
    n_targets: int
    p_missing: float
    rms_m: float
    eps_m: float  # bound with every neighbor report present
    trials: int
    failures: int


def run_missing_rss_sweep(cfg: ExperimentConfig, p_values: Optional[Iterable[float]] = None,
                          n_values: Optional[Iterable[int]] = None,
                          workers: int = 1) -> List[MissingRssRow]:
    """
    Monte-Carlo RMS at the scenario center versus the missing neighbor RSS probability.

    n_values defaults to the configured cluster only; other sizes use a
    square grid with the configured spacing.
    """
    p_values = tuple(p_values if p_values is not None else cfg.sweep.p_values)
    rows = []
    for n_targets in (tuple(n_values) if n_values is not None else (None,)):
        base = cfg if n_targets is None else cfg.with_cluster(n_targets, cfg.grid_spacing_m)
        base = replace(base, static_points="center")
        for p_missing in p_values:
            point = run_static(replace(base, p_missing_rss=float(p_missing)), workers,
                               keep_records=False).points[0]
            rows.append(MissingRssRow(base.n_targets, float(p_missing), point.rms, point.eps,
                                      point.trials, point.failures))
            logger.info("N=%d p_missing=%.2f: RMS %.3f m", base.n_targets, p_missing, point.rms)
    return rows


@dataclass
class MobileResult:
    records: List[TrialRecord]
    eps_values: List[float]  # bound at every tracked sample, in record order
    tracks: int

    def _is_tracked(self, record: TrialRecord) -> bool:
        # The first sample of a track starts cold from the center
        return record.step > 0 or all(other.step == 0 for other in self.records)

    def _tracked(self) -> List[TrialRecord]:
        return [record for record in self.records if self._is_tracked(record)]

    @property
    def rms(self) -> float:
        """Tracking RMS over warm-started samples."""
        return rms_error(self._tracked())

    @property
    def acquisition_rms(self) -> float:
        return rms_error(record for record in self.records if record.step == 0)

    @property
    def eps(self) -> float:
        """sqrt(mean eps^2) over the same samples as rms."""
        single = all(record.step == 0 for record in self.records)
        values = [eps for record, eps in zip(self.records, self.eps_values)
                  if (single or record.step > 0) and record.ok and math.isfinite(eps)]
        return math.sqrt(float(np.mean(np.square(values)))) if values else math.nan

    @property
    def failures(self) -> int:
        return sum(1 for record in self.records if not record.ok)

    def summary(self) -> Dict[str, Any]:
        return {
            'tracks': self.tracks,
            'samples': len(self.records),
            'failures': self.failures,
            'failure_rate': self.failures / len(self.records) if self.records else 0.0,
            'rms_m': self.rms,
            'acquisition_rms_m': self.acquisition_rms,
            'eps_m': self.eps,
        }


def _run_track(task: Tuple[ExperimentConfig, int, PositionVector]
               ) -> Tuple[List[TrialRecord], List[float]]:
    cfg, track, center = task
    spec = cfg.mobility
    side = cfg.area_side_m
    cluster = TargetCluster(cfg.formation)
    bounds = cluster.anchor_range(side)
    motion_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, track]))
    start = (motion_rng.uniform(bounds[0], bounds[1]), motion_rng.uniform(bounds[2], bounds[3]))
    if spec.initial_heading == "random":
        heading = motion_rng.uniform(0.0, 2.0 * math.pi)
    else:
        heading = float(spec.initial_heading)
    walker = ReflectingWalker(start, heading, spec.speed_ms, bounds, motion_rng,
                              spec.heading_change_period_s)

    layout = ObservationLayout.build(cluster.n, cfg.references.m, cfg.scheme)
    policy = MaskPolicy(cfg.mask_policy)
    anchor = start
    previous: Optional[PositionVector] = None
    records, eps_values = [], []
    for step in range(spec.n_samples):
        if step > 0:
            anchor = walker.advance(spec.sample_interval_s)
        truth = cluster_positions(cluster.moved_to(anchor))
        noise_rng, mask_rng = trial_streams(cfg.seed, track, step)
        init = previous if previous is not None else center
        try:
            obs = synthesize(truth, layout, cfg.references, cfg.channel, cfg.p_missing_rss,
                             noise_rng, mask_rng)
            report = solve(init, obs, cfg.references, cfg.channel, cfg.iterations, side, policy)
            previous = report.final.positions
            records.append(TrialRecord(track, step, truth, previous, report.final.iteration))
        except LocalizationError as exc:
            logger.debug("track %d step %d failed: %s", track, step, exc)
            previous = None
            records.append(TrialRecord(track, step, truth, None, 0, failure=str(exc)))
        try:
            eps_values.append(rms_bound(truth, layout, cfg.references, cfg.channel))
        except LocalizationError:
            eps_values.append(math.nan)
    return records, eps_values


def run_mobile(cfg: ExperimentConfig, workers: int = 1) -> MobileResult:
    """
    Track a moving cluster.

    The anchor starts at a uniform random point with a random (or fixed)
    heading and reflects off the walls so the whole cluster stays inside
    the square. The first sample solves from the scenario center; every
    later sample starts from the previous estimate.
    """
    if cfg.mobility is None:
        raise ConfigError("mobility", "a mobility section is required for tracking runs")
    center = center_start(cfg)
    tasks = [(cfg, track, center) for track in range(cfg.mobility.tracks)]
    records, eps_values = [], []
    for track_records, track_eps in _ordered_map(_run_track, tasks, workers):
        records.extend(track_records)
        eps_values.extend(track_eps)
    result = MobileResult(records, eps_values, cfg.mobility.tracks)
    logger.info("Mobile run at %.1f km/h: %d tracks, tracking RMS %.3f m, %d failures",
                cfg.mobility.speed_kmh, result.tracks, result.rms, result.failures)
    return result


def run_crb_map(cfg: ExperimentConfig,
                schemes: Iterable[Scheme] = tuple(Scheme)) -> List[GridRow]:
    """Bounds map over the anchor lattice for each scheme."""
    return crb_map(cfg.area_side_m, cfg.references, cfg.formation, cfg.channel, schemes,
                   cfg.lattice_pitch_m)


def run_area_sweep(cfg: ExperimentConfig,
                   schemes: Iterable[Scheme] = tuple(Scheme)) -> List[AreaRow]:
    """Lattice-averaged bounds for each configured square side."""
    return area_sweep(cfg.sweep.area_sides_m, schemes, [cfg.channel], cfg.formation)
