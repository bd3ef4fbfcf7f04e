# Utilities module
__version__ = "1.0.0"

# Config is imported as utils.config; it depends on the channel and scenario packages.
from .errors import ConfigError, DegenerateGeometryError, DivergenceError, LocalizationError
from .logging_setup import setup_logging

__all__ = ['__version__', 'LocalizationError', 'ConfigError', 'DegenerateGeometryError', 'DivergenceError',
           'setup_logging']
