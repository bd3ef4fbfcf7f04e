"""
Analytic Jacobian of the observation model.

Columns are x of targets 1..N followed by y of targets 1..N. A neighbor
RSS row touches four columns (both targets), a TOA or remote RSS row only
the two columns of its target.
"""

from typing import List, Optional

import numpy as np

from channel.model import ChannelParams, PhysConst
from scenario.geometry import PositionVector, ReferenceLayout
from .observation import ObservationLayout, RowKind, row_geometry


def rss_slope(params: ChannelParams) -> float:
    """Derivative of the mean path loss w.r.t. ln(distance), 10*eta/ln(10) dB."""
    return params.alpha_prime


def assemble(pos: PositionVector, layout: ObservationLayout, refs: Optional[ReferenceLayout],
             params: ChannelParams, phys: PhysConst = PhysConst(),
             warnings: Optional[List[str]] = None) -> np.ndarray:
    """
    Partial-derivative matrix of the forward model.

    Args:
        pos: Linearization point
        layout: Rows to differentiate (masked rows already removed)
        refs: Reference nodes
        params: Channel parameters
        phys: Physical constants
        warnings: Optional list collecting near-coincidence warnings

    Returns:
        D x 2N matrix in layout row order
    """
    n = pos.n
    dx, dy, d = row_geometry(pos, layout, refs, warnings)
    toa = layout.kind == RowKind.TOA
    # d(d/c)/dx = dx/(c*d); d(alpha' ln d)/dx = alpha' dx/d^2
    scale = np.where(toa, 1.0 / (phys.c * d), params.alpha_prime / d ** 2)
    gx, gy = scale * dx, scale * dy

    rows = np.arange(layout.size)
    jacobian = np.zeros((layout.size, 2 * n))
    jacobian[rows, layout.i] = gx
    jacobian[rows, n + layout.i] = gy
    neighbor = layout.kind == RowKind.NEIGHBOR_RSS
    jacobian[rows[neighbor], layout.j[neighbor]] = -gx[neighbor]
    jacobian[rows[neighbor], n + layout.j[neighbor]] = -gy[neighbor]
    return jacobian


def neighbor_rss_rows(pos: PositionVector, params: ChannelParams) -> np.ndarray:
    """Block of neighbor RSS rows, C(N,2) x 2N, pairs in lexicographic order."""
    layout = ObservationLayout.of_kinds(pos.n, 0, [RowKind.NEIGHBOR_RSS])
    return assemble(pos, layout, None, params)


def toa_rows(pos: PositionVector, refs: ReferenceLayout,
             phys: PhysConst = PhysConst()) -> np.ndarray:
    """Block of TOA rows, MN x 2N, grouped by target."""
    layout = ObservationLayout.of_kinds(pos.n, refs.m, [RowKind.TOA])
    # params only matter for RSS rows
    return assemble(pos, layout, refs, ChannelParams(), phys)


def remote_rss_rows(pos: PositionVector, refs: ReferenceLayout,
                    params: ChannelParams) -> np.ndarray:
    """Block of remote RSS rows, MN x 2N, grouped by target."""
    layout = ObservationLayout.of_kinds(pos.n, refs.m, [RowKind.REMOTE_RSS])
    return assemble(pos, layout, refs, params)
