import numpy as np
import pytest

from effortscore.bayes import SignalModel, posterior_mean_distribution
from effortscore.core import FiniteDistribution

# closed-form posterior means for a uniform prior on [0.6, 1] and one coin flip:
# E[t] = 0.8, E[t^2] = 49/75
E1, E2 = 0.8, 49 / 75
INTRO_HIGH = E2 / E1
INTRO_LOW = (E1 - E2) / (1 - E1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def intro_model():
    return SignalModel.uniform_bernoulli(0.6, 1.0, 401)


@pytest.fixture(scope="session")
def intro_dist(intro_model):
    return posterior_mean_distribution(intro_model)


@pytest.fixture
def intro_exact():
    return FiniteDistribution([[INTRO_LOW], [INTRO_HIGH]], [0.2, 0.8])


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
