"""Shared fixtures; puts src/ on sys.path like the entry point does."""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from channel.model import CLEAR, OBSTRUCTED, ChannelParams  # noqa: E402
from scenario.geometry import corner_references  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte-Carlo campaigns")


@pytest.fixture
def clear() -> ChannelParams:
    return CLEAR


@pytest.fixture
def obstructed() -> ChannelParams:
    return OBSTRUCTED


@pytest.fixture
def noiseless() -> ChannelParams:
    return CLEAR.with_noise(0.0, 0.0)


@pytest.fixture
def square50():
    """Four corner references on the 50 m square."""
    return corner_references(50.0)


@pytest.fixture
def square18():
    return corner_references(18.0)
