# Localization module
from .observation import (ObservationLayout, ObservationSet, RowKind, forward_model,
                          build_covariance, synthesize, write_observation_csv)
from .jacobian import assemble, neighbor_rss_rows, toa_rows, remote_rss_rows
from .estimator import (EstimateState, SolveReport, MaskPolicy, gn_step, solve, objective,
                        scenario_center)
from .bounds import (FisherInfo, BoundsReport, GridRow, AreaRow, fisher, crb_std, crb_stds,
                     rms_bound, linearization_bias, noise_gain, expected_rms, bounds_report,
                     crb_map, area_sweep)

__all__ = [
    'ObservationLayout', 'ObservationSet', 'RowKind', 'forward_model', 'build_covariance',
    'synthesize', 'write_observation_csv',
    'assemble', 'neighbor_rss_rows', 'toa_rows', 'remote_rss_rows',
    'EstimateState', 'SolveReport', 'MaskPolicy', 'gn_step', 'solve', 'objective',
    'scenario_center',
    'FisherInfo', 'BoundsReport', 'GridRow', 'AreaRow', 'fisher', 'crb_std', 'crb_stds',
    'rms_bound', 'linearization_bias', 'noise_gain', 'expected_rms', 'bounds_report',
    'crb_map', 'area_sweep'
]
