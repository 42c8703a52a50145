"""Shared fixtures: fitted solvers are cached for the whole session."""

import numpy as np
import pytest

from stfr import SpaceTimeFRSolver

_CACHE = {}


def fit_cached(**params):
    """Fit a :class:`SpaceTimeFRSolver` once per distinct parameter set."""
    key = tuple(sorted(params.items()))
    if key not in _CACHE:
        _CACHE[key] = SpaceTimeFRSolver(**params).fit()
    return _CACHE[key]


@pytest.fixture(scope="session")
def fitted():
    return fit_cached


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
