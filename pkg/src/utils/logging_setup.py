"""Logging bootstrap for the command-line front end."""

import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(quiet: bool = False, verbose: bool = False) -> None:
    """
    Configure the root logger once.

    Args:
        quiet: Only show warnings and errors
        verbose: Show debug messages (ignored when quiet is set)
    """
    if quiet:
        level = logging.WARNING
    elif verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
