import numpy as np
import pytest

from unlinked_deconv.data_model import Dataset, GaussianNoise
from unlinked_deconv.criterion import CriterionContext
from unlinked_deconv.experiments import ExperimentConfig, run_comparison, run_rate_study

# Lines reported by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def hand_ctx():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = np.array([0.2, -0.3, 1.1])
    return CriterionContext(Dataset(x, y, sigma=1.0), GaussianNoise(1.0))


def random_ctx(n, d=2, seed=0, sigma=1.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = x @ rng.normal(0, 2, d) + sigma * rng.standard_normal(n)
    return CriterionContext(Dataset(x, rng.permutation(y), sigma=sigma), GaussianNoise(sigma))


# Desk-scale studies shared between the acceptance suite and slower property tests.
RATE_CONFIG = ExperimentConfig(
    setting="a", n_list=(500, 1000, 2000, 4000), reps=50, reference_size=100_000, master_seed=1
)
COMPARISON_CONFIG = ExperimentConfig(setting="a", n_list=(500,), reps=100, test_size=100, master_seed=1)


@pytest.fixture(scope="session")
def rate_study_a():
    return run_rate_study(RATE_CONFIG)


@pytest.fixture(scope="session")
def comparison_a():
    return run_comparison(COMPARISON_CONFIG)[0]
