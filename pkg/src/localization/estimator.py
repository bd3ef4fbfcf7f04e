"""
Joint maximum-likelihood position estimation.

Weighted least squares on the linearized observation model, refined by a
fixed number of Gauss-Newton iterations. Every target's coordinates are
solved together, so neighbor RSS rows couple the targets.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from channel.model import ChannelParams, PhysConst
from scenario.geometry import (PositionVector, ReferenceLayout, TargetCluster, centered_anchor,
                               cluster_positions)
from utils.errors import ConfigError, DegenerateGeometryError, DivergenceError
from .jacobian import assemble
from .observation import ObservationSet, forward_model

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
CONVERGED_STEP = 1e-4  # meters
SAFETY_BOX_FACTOR = 10.0


class MaskPolicy(Enum):
    """How missing rows are removed from the normal equations."""
    DELETE = "delete"  # drop the rows from r, f, G and the covariance
    ZERO = "zero"      # keep the rows but zero their residual and Jacobian entries


@dataclass(frozen=True)
class EstimateState:
    """Current iterate of the solver."""
    positions: PositionVector
    iteration: int = 0
    converged: bool = False
    last_step_norm: float = float('nan')


@dataclass
class SolveReport:
    """Outcome of an iterative solve."""
    final: EstimateState
    step_norms: List[float] = field(default_factory=list)
    condition: float = float('nan')  # of the whitened normal matrix at the last step
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready representation."""
        positions = self.final.positions
        return {
            'x': positions.x.tolist(),
            'y': positions.y.tolist(),
            'iterations': self.final.iteration,
            'converged': self.final.converged,
            'last_step_norm_m': self.final.last_step_norm,
            'step_norms_m': list(self.step_norms),
            'condition': self.condition,
            'warnings': list(self.warnings),
        }


def scenario_center(side: float,
                    formation: Sequence[Tuple[float, float]] = ((0.0, 0.0),)) -> PositionVector:
    """
    Default starting point: the formation centred on the square's center.

    A single target starts exactly at (L/2, L/2). Larger clusters keep
    their offsets, since coincident starting points leave neighbor RSS
    rows undefined.
    """
    return cluster_positions(TargetCluster(tuple(formation), centered_anchor(side, formation)))


def _whitened_system(current: PositionVector, obs: ObservationSet, refs: ReferenceLayout,
                     params: ChannelParams, policy: MaskPolicy, phys: PhysConst,
                     warnings: Optional[List[str]]) -> Tuple[np.ndarray, np.ndarray]:
    """Whitened Jacobian and residual at the current iterate."""
    active = obs.active_layout
    jacobian = assemble(current, active, refs, params, phys, warnings)
    residual = obs.active_r - forward_model(current, active, refs, params, phys)
    weights = 1.0 / np.sqrt(obs.active_lambda)
    if policy is MaskPolicy.ZERO:
        # Missing rows stay in place with zero residual and zero gradient
        full_jacobian = np.zeros((obs.layout.size, jacobian.shape[1]))
        full_residual = np.zeros(obs.layout.size)
        full_weights = 1.0 / np.sqrt(obs.lambda_diag)
        full_jacobian[obs.mask] = jacobian
        full_residual[obs.mask] = residual
        jacobian, residual, weights = full_jacobian, full_residual, full_weights
    return jacobian * weights[:, None], residual * weights


def _solve_normal(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, float]:
    normal = a.T @ a
    condition = float(np.linalg.cond(normal))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise DegenerateGeometryError(
            f"normal matrix is numerically singular (condition {condition:.3g})",
            condition=condition)
    try:
        factor = cho_factor(normal)
    except LinAlgError:
        raise DegenerateGeometryError("normal matrix is not positive definite",
                                      condition=condition) from None
    return cho_solve(factor, a.T @ b), condition


def _step(current: PositionVector, obs: ObservationSet, refs: ReferenceLayout,
          params: ChannelParams, policy: MaskPolicy, phys: PhysConst,
          warnings: Optional[List[str]] = None) -> Tuple[PositionVector, float]:
    a, b = _whitened_system(current, obs, refs, params, policy, phys, warnings)
    delta, condition = _solve_normal(a, b)
    return PositionVector.from_vector(current.as_vector() + delta), condition


def gn_step(current: PositionVector, obs: ObservationSet, refs: ReferenceLayout,
            params: ChannelParams, policy: MaskPolicy = MaskPolicy.DELETE,
            phys: PhysConst = PhysConst()) -> PositionVector:
    """
    One Gauss-Newton update: current + (G'WG)^-1 G'W (r - f(current)).

    Args:
        current: Linearization point
        obs: Measurements (masked rows excluded)
        refs: Reference nodes
        params: Channel parameters
        policy: How missing rows are removed
        phys: Physical constants

    Returns:
        The updated positions

    Raises:
        DegenerateGeometryError: coincident nodes or a singular normal matrix
    """
    return _step(current, obs, refs, params, policy, phys)[0]


def safety_box(refs: ReferenceLayout,
               area_side: Optional[float] = None) -> Tuple[float, float, float, float]:
    """(min_x, max_x, min_y, max_y) of the box an iterate must not leave."""
    min_x, max_x, min_y, max_y = refs.bounding_box()
    side = area_side if area_side is not None else max(max_x - min_x, max_y - min_y)
    half = SAFETY_BOX_FACTOR * side / 2.0
    cx, cy = (min_x + max_x) / 2.0, (min_y + max_y) / 2.0
    return cx - half, cx + half, cy - half, cy + half


def solve(init: PositionVector, obs: ObservationSet, refs: ReferenceLayout,
          params: ChannelParams, k: int, area_side: Optional[float] = None,
          policy: MaskPolicy = MaskPolicy.DELETE,
          phys: PhysConst = PhysConst()) -> SolveReport:
    """
    Run exactly k Gauss-Newton steps from init.

    The convergence flag (last step under 1e-4 m) is reported but never
    stops the iteration early.

    Args:
        init: Starting positions, usually the scenario center or the previous estimate
        obs: Measurements
        refs: Reference nodes
        params: Channel parameters
        k: Number of iterations (>= 1)
        area_side: Square side used for the safety box (defaults to the references' extent)
        policy: How missing rows are removed
        phys: Physical constants

    Returns:
        SolveReport with the final state and per-step diagnostics
    """
    if k < 1:
        raise ConfigError("iterations", f"must be >= 1, got {k}")
    min_x, max_x, min_y, max_y = safety_box(refs, area_side)
    current = init
    report = SolveReport(final=EstimateState(init))
    for iteration in range(1, k + 1):
        updated, report.condition = _step(current, obs, refs, params, policy, phys,
                                          report.warnings)
        step = float(np.linalg.norm(updated.as_vector() - current.as_vector()))
        if not np.isfinite(step):
            raise DivergenceError(f"iteration {iteration} produced a non-finite step")
        outside = ((updated.x < min_x) | (updated.x > max_x) |
                   (updated.y < min_y) | (updated.y > max_y))
        if np.any(outside):
            node = int(np.argmax(outside))
            raise DivergenceError(
                f"iteration {iteration} moved target {node + 1} to "
                f"({updated.x[node]:.1f}, {updated.y[node]:.1f}), outside the safety box")
        report.step_norms.append(step)
        current = updated
    last = report.step_norms[-1]
    report.final = EstimateState(current, iteration=k, converged=last < CONVERGED_STEP,
                                 last_step_norm=last)
    logger.debug("solve finished after %d iterations, last step %.3g m", k, last)
    return report


def objective(pos: PositionVector, obs: ObservationSet, refs: ReferenceLayout,
              params: ChannelParams, phys: PhysConst = PhysConst()) -> float:
    """Weighted squared residual (r - f)' Lambda^-1 (r - f) over present rows."""
    residual = obs.active_r - forward_model(pos, obs.active_layout, refs, params, phys)
    return float(np.sum(residual ** 2 / obs.active_lambda))
