import numpy as np
import pytest

from qtunnel.evolve import Simulation
from qtunnel.model import InitialState, SimulationConfig, validate
from qtunnel.spectral import compute_coefficients


@pytest.fixture(scope="session")
def config():
    return validate(SimulationConfig())


@pytest.fixture(scope="session")
def ground_sim(config):
    return Simulation(config)


@pytest.fixture(scope="session")
def excited_sim():
    return Simulation(validate(SimulationConfig(initial_state=InitialState.EXCITED)))


@pytest.fixture(scope="session")
def mix_sim():
    return Simulation(validate(SimulationConfig(initial_state=InitialState.EQUAL_MIX)))


@pytest.fixture(scope="session")
def amplitudes(ground_sim):
    return ground_sim.amplitudes


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
