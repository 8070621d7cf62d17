import numpy as np
import pytest

from rangelm.linalg import norm


def noisy_data(problem, rel, seed=0):
    """Exact data plus uniform noise of relative size ``rel``; returns ``(y_delta, delta_abs)``."""
    y = problem.exact_data()
    noi = np.random.default_rng(seed).uniform(-1, 1, y.size)
    noi /= norm(noi, problem.y_ip)
    delta = rel * norm(y, problem.y_ip)
    return y + delta * noi, delta


@pytest.fixture
def make_noisy():
    return noisy_data
