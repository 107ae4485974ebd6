"""Shared fixtures.

Heavy objects (induced systems, pressures, operator eigendata, survivor
builds) are session scoped so the unit tests and the acceptance battery
pay for them once.  Pinned reference numbers live in frozen.py.
"""
import numpy as np
import pytest

from openmaps import MapParams, build_induced, build_markov_hole

GAMMA = 0.5


@pytest.fixture(scope="session")
def par():
    return MapParams(GAMMA)


@pytest.fixture(scope="session")
def closed_sys(par):
    return build_induced(par, n_max=400)


@pytest.fixture(scope="session")
def rlr_hole(par):
    return build_markov_hole(par, 3, ["RLR"])


@pytest.fixture(scope="session")
def rlr_sys(par, rlr_hole):
    return build_induced(par, hole=rlr_hole, n_max=400)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def store():
    """Cross-file scratch cache for expensive intermediates."""
    return {}
