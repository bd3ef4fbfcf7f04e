"""
Performance bounds for the four localization schemes.

Fisher information G'Lambda^-1 G, per-node Cramer-Rao standard deviations,
the linearized estimator covariance P, its RMS bound sqrt(tr P / N), and
the bias a single step picks up from a distant starting point.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from channel.model import ChannelParams, PhysConst
from scenario.geometry import (PositionVector, ReferenceLayout, Scheme, TargetCluster,
                               anchor_lattice, cluster_positions,
                               corner_references)
from utils.errors import DegenerateGeometryError
from .jacobian import assemble
from .observation import ObservationLayout, build_covariance, forward_model

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class FisherInfo:
    """2N x 2N Fisher information, columns x1..xN, y1..yN."""
    matrix: np.ndarray

    @property
    def n_targets(self) -> int:
        return self.matrix.shape[0] // 2

    def covariance(self) -> Optional[np.ndarray]:
        """Inverse of the information, or None when it is singular."""
        return _inverse(self.matrix)


@dataclass(frozen=True, eq=False)
class BoundsReport:
    """Bounds for one cluster position and scheme."""
    crb_std: np.ndarray              # per-node CRB std, meters
    eps: float                       # RMS bound sqrt(tr P / N), meters
    covariance: np.ndarray           # P, 2N x 2N
    bias: Optional[np.ndarray] = None  # linearization bias from a starting point, meters
    expected_rms: Optional[float] = None

    @property
    def mean_crb(self) -> float:
        return float(np.mean(self.crb_std))


def _inverse(matrix: np.ndarray) -> Optional[np.ndarray]:
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        return None
    try:
        factor = cho_factor(matrix)
    except LinAlgError:
        return None
    return cho_solve(factor, np.eye(matrix.shape[0]))


def _weighted_jacobian(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
                       params: ChannelParams, phys: PhysConst) -> Tuple[np.ndarray, np.ndarray]:
    jacobian = assemble(pos, layout, refs, params, phys)
    return jacobian, jacobian / build_covariance(layout, params)[:, None]


def fisher(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
           params: ChannelParams, phys: PhysConst = PhysConst()) -> FisherInfo:
    """
    Fisher information of the scheme's measurements at the true positions.

    For Gaussian rows with position-independent variances this is G'Lambda^-1 G.
    """
    jacobian, weighted = _weighted_jacobian(pos, layout, refs, params, phys)
    matrix = jacobian.T @ weighted
    return FisherInfo(0.5 * (matrix + matrix.T))


def crb_std(fim: FisherInfo, node: int) -> float:
    """
    Cramer-Rao bound on the position error std of one target.

    Args:
        fim: Fisher information
        node: 0-based target index

    Returns:
        sqrt(var x + var y) in meters, or inf when the information is singular
    """
    covariance = fim.covariance()
    if covariance is None:
        return math.inf
    n = fim.n_targets
    return float(np.sqrt(covariance[node, node] + covariance[n + node, n + node]))


def crb_stds(fim: FisherInfo) -> np.ndarray:
    """Per-node CRB std for every target (inf when singular)."""
    covariance = fim.covariance()
    n = fim.n_targets
    if covariance is None:
        return np.full(n, math.inf)
    diagonal = np.diag(covariance)
    return np.sqrt(diagonal[:n] + diagonal[n:])


def _covariance(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
                params: ChannelParams, phys: PhysConst) -> np.ndarray:
    covariance = fisher(pos, layout, refs, params, phys).covariance()
    if covariance is None:
        raise DegenerateGeometryError("information matrix is singular for this geometry")
    return covariance


def rms_bound(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
              params: ChannelParams, phys: PhysConst = PhysConst()) -> float:
    """Per-node RMS error bound sqrt(tr(P)/N) in meters."""
    covariance = _covariance(pos, layout, refs, params, phys)
    return float(np.sqrt(np.trace(covariance) / pos.n))


def noise_gain(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
               params: ChannelParams, phys: PhysConst = PhysConst()) -> np.ndarray:
    """
    Linear map (G'Lambda^-1 G)^-1 G'Lambda^-1 from measurement noise to estimate error.

    Returns:
        2N x D matrix evaluated at pos
    """
    covariance = _covariance(pos, layout, refs, params, phys)
    _, weighted = _weighted_jacobian(pos, layout, refs, params, phys)
    return covariance @ weighted.T


def linearization_bias(truth: PositionVector, init: PositionVector, layout: ObservationLayout,
                       refs: ReferenceLayout, params: ChannelParams,
                       phys: PhysConst = PhysConst()) -> np.ndarray:
    """
    Error a single step from init makes even without noise.

    The Taylor remainder f(truth) - f(init) - G (truth - init), with G at
    init, mapped through the step's gain.

    Returns:
        Length-2N bias vector in meters (x then y)
    """
    jacobian = assemble(init, layout, refs, params, phys)
    remainder = (forward_model(truth, layout, refs, params, phys)
                 - forward_model(init, layout, refs, params, phys)
                 - jacobian @ (truth.as_vector() - init.as_vector()))
    return noise_gain(init, layout, refs, params, phys) @ remainder


def expected_rms(truth: PositionVector, init: PositionVector, layout: ObservationLayout,
                 refs: ReferenceLayout, params: ChannelParams,
                 phys: PhysConst = PhysConst()) -> float:
    """
    Predicted per-node RMS after one step from init: sqrt((|bias|^2 + tr P)/N).

    P is evaluated at the truth, so the prediction never drops below the
    RMS bound and equals it when init is the truth.
    """
    bias = linearization_bias(truth, init, layout, refs, params, phys)
    covariance = _covariance(truth, layout, refs, params, phys)
    return float(np.sqrt((bias @ bias + np.trace(covariance)) / truth.n))


def bounds_report(pos: PositionVector, layout: ObservationLayout, refs: ReferenceLayout,
                  params: ChannelParams, init: Optional[PositionVector] = None,
                  phys: PhysConst = PhysConst()) -> BoundsReport:
    """All bounds at one position; bias and one-step RMS only when init is given."""
    fim = fisher(pos, layout, refs, params, phys)
    covariance = fim.covariance()
    if covariance is None:
        raise DegenerateGeometryError("information matrix is singular for this geometry")
    diagonal = np.diag(covariance)
    report = BoundsReport(
        crb_std=np.sqrt(diagonal[:pos.n] + diagonal[pos.n:]),
        eps=float(np.sqrt(np.trace(covariance) / pos.n)),
        covariance=covariance,
    )
    if init is not None:
        bias = linearization_bias(pos, init, layout, refs, params, phys)
        report = BoundsReport(
            crb_std=report.crb_std, eps=report.eps, covariance=covariance, bias=bias,
            expected_rms=float(np.sqrt((bias @ bias + np.trace(covariance)) / pos.n)),
        )
    return report


@dataclass(frozen=True)
class GridRow:
    """One cell of a bounds map."""
    x: float
    y: float
    scheme: str
    condition: str
    metric: str  # "crb" or "eps"
    value_m: float


def crb_map(side: float, references: ReferenceLayout, formation: Sequence[Tuple[float, float]],
            params: ChannelParams, schemes: Iterable[Scheme] = tuple(Scheme),
            pitch: float = 1.0, anchors: Optional[np.ndarray] = None) -> List[GridRow]:
    """
    Bounds over a lattice of cluster positions.

    Each lattice point anchors the cluster; x and y of a row are the
    cluster's centroid. Two rows per point and scheme: "crb", the mean over
    nodes of the per-node CRB std, and "eps", the RMS bound.

    Args:
        side: Square side in meters
        references: Reference nodes
        formation: Cluster offsets
        params: Channel parameters
        schemes: Schemes to evaluate
        pitch: Lattice pitch in meters
        anchors: Explicit K x 2 anchors (overrides the lattice)

    Returns:
        Rows ordered by scheme, then lattice point (x fastest), then metric
    """
    if anchors is None:
        anchors = anchor_lattice(side, pitch, formation)
    cluster = TargetCluster(tuple(formation))
    rows: List[GridRow] = []
    for scheme in schemes:
        layout = ObservationLayout.build(cluster.n, references.m, scheme)
        for anchor in anchors:
            pos = cluster_positions(cluster.moved_to((anchor[0], anchor[1])))
            cx, cy = pos.centroid()
            stds = crb_stds(fisher(pos, layout, references, params))
            eps = float(np.sqrt(np.mean(stds ** 2)))
            for metric, value in (("crb", float(np.mean(stds))), ("eps", eps)):
                rows.append(GridRow(cx, cy, scheme.value, params.condition.value, metric, value))
        logger.debug("bounds map for %s: %d points", scheme.value, len(anchors))
    return rows


@dataclass(frozen=True)
class AreaRow:
    """Lattice-averaged bounds for one square size."""
    side_m: float
    scheme: str
    condition: str
    crb_m: float
    eps_m: float


def area_sweep(area_sides: Iterable[float], schemes: Iterable[Scheme],
               conditions: Iterable[ChannelParams],
               formation: Sequence[Tuple[float, float]] = ((0.0, 0.0),),
               points_per_side: int = 10) -> List[AreaRow]:
    """
    Average bounds over the square as its size grows.

    For each side L the four corners carry references and the cluster is
    placed on a points_per_side x points_per_side lattice of pitch
    L/points_per_side. RSS bounds grow with L while TOA bounds stay flat.

    Returns:
        One row per (side, scheme, condition)
    """
    schemes = list(schemes)
    conditions = list(conditions)
    rows: List[AreaRow] = []
    for side in area_sides:
        references = corner_references(side)
        anchors = anchor_lattice(side, side / points_per_side, formation)
        for params in conditions:
            for scheme in schemes:
                grid = crb_map(side, references, formation, params, [scheme], anchors=anchors)
                crb = [row.value_m for row in grid if row.metric == "crb"]
                eps = [row.value_m for row in grid if row.metric == "eps"]
                rows.append(AreaRow(float(side), scheme.value, params.condition.value,
                                    float(np.mean(crb)), float(np.mean(eps))))
    return rows
