# Scenario module
from .geometry import (PositionVector, ReferenceLayout, TargetCluster, Scheme, cluster_positions,
                       default_formation, corner_references, grid_references, centered_anchor,
                       anchor_lattice, reference_clearance, MIN_REFERENCES)

__all__ = [
    'PositionVector', 'ReferenceLayout', 'TargetCluster', 'Scheme', 'cluster_positions',
    'default_formation', 'corner_references', 'grid_references', 'centered_anchor',
    'anchor_lattice', 'reference_clearance', 'MIN_REFERENCES'
]
