import numpy as np
import pytest

from ddminfer.analytic import SwitchModel
from ddminfer.simulate import simulate_switch_taus

# master seed for every statistical test in the suite
SEED = 20260809

SWITCH_MODEL = SwitchModel(mu=1.0, b=1.0, T=0.5)


@pytest.fixture(scope="session")
def switch_taus_100k():
    """n=1e5 Euler-Maruyama switch-model decision times (dt=1e-4)."""
    return simulate_switch_taus(100000, SWITCH_MODEL, 1e-4, seed=SEED)


@pytest.fixture(scope="session")
def exact_switch_taus_100k():
    """n=1e5 draws from the exact switch-model law (test oracle sampler)."""
    from _oracles import sample_switch_exact

    return sample_switch_exact(100000, 1.0, 1.0, 0.5, seed=56)
