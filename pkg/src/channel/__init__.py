# Channel module
from .model import (ChannelParams, ChannelCondition, PhysConst, SPEED_OF_LIGHT, CLEAR, OBSTRUCTED,
                    preset, mean_path_loss_db, sample_path_loss_db, rss_distance_std, sample_toa,
                    toa_distance_std, rss_variance, toa_variance)

__all__ = [
    'ChannelParams', 'ChannelCondition', 'PhysConst', 'SPEED_OF_LIGHT', 'CLEAR', 'OBSTRUCTED',
    'preset', 'mean_path_loss_db', 'sample_path_loss_db', 'rss_distance_std', 'sample_toa',
    'toa_distance_std', 'rss_variance', 'toa_variance'
]
