import numpy as np
import pytest

from cqed.model import DriveRamp, ModelParams
from cqed.operators import HilbertSpec


@pytest.fixture
def tol():
    """Numerical tolerance for exact identities"""
    return 1e-10


@pytest.fixture
def small_space():
    return HilbertSpec(6)


@pytest.fixture
def space():
    return HilbertSpec(20)


@pytest.fixture
def usc_params():
    """Bare parameters of the adiabatic preparation"""
    return ModelParams(delta_c=1.0, delta_q=0.0, g=0.1, kappa=1e-4, gamma=5e-5)


@pytest.fixture
def closed_params():
    return ModelParams(delta_c=1.0, delta_q=0.0, g=0.1)


@pytest.fixture
def short_ramp():
    # 10.86 dB reached with tau = 10
    return DriveRamp(r_max=1.25, tau=10.0, t_f=50.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_state(rng):
    """Draws normalized random amplitudes of the given dimension"""
    def draw(dim):
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return psi / np.linalg.norm(psi)
    return draw
