# Simulation module
# Experiment drivers live in simulation.montecarlo, which depends on utils.config.
from .mobility import MobilitySpec, ReflectingWalker, reflect
from .records import TrialRecord, rms_error, write_csv, write_trial_csv, write_summary_json

__all__ = ['MobilitySpec', 'ReflectingWalker', 'reflect', 'TrialRecord', 'rms_error',
           'write_csv', 'write_trial_csv', 'write_summary_json']
