import numpy as np
import pytest

from annihilation import InteractionLaw, ParticleSystem, StepController, run_hybrid
from annihilation.config import random_positions


@pytest.fixture(scope="session")
def controller():
    return StepController()


def random_system(n, seed):
    x, b = random_positions(n, seed)
    return ParticleSystem(x, b)


@pytest.fixture(scope="session")
def two_body_runs(controller):
    """Pure two-body runs from r0 = 1 for a in {0.5, 1, 2}."""
    return {
        a: run_hybrid(InteractionLaw(a), ParticleSystem([0.0, 1.0], [-1, 1]), 1.0, controller)
        for a in (0.5, 1.0, 2.0)
    }


@pytest.fixture(scope="session")
def triple_run(controller):
    law = InteractionLaw(1.0)
    return law, run_hybrid(law, ParticleSystem([-1.0, 0.0, 1.0], [1, -1, 1]), 2.0, controller)


def sorted_uniform(rng, lo, hi, n):
    return np.sort(rng.uniform(lo, hi, n))
