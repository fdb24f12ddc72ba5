"""Shared fixtures: default model objects and one reusable protocol run."""

import numpy as np
import pytest

import nvpump as nv


@pytest.fixture(scope="session")
def params():
    return nv.ModelParams()


@pytest.fixture(scope="session")
def model(params):
    return nv.build_model(params)


@pytest.fixture(scope="session")
def uniform_G():
    p = np.zeros(8)
    p[:3] = 1.0 / 3.0
    return p


@pytest.fixture(scope="session")
def default_run():
    """Default two-phase protocol; shared because several modules check it."""
    return nv.run_protocol(nv.ProtocolConfig())


@pytest.fixture(scope="session")
def ness():
    """Laser-on steady state at the default pump rate."""
    m = nv.build_model(nv.ModelParams())
    return nv.steady_state(nv.build_rate_matrix(m, True))
