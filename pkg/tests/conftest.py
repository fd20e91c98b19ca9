import numpy as np
import pytest
from hypothesis import settings

from repmix import build_dataset

settings.register_profile("repmix", max_examples=50, deadline=None)
settings.load_profile("repmix")


def pytest_addoption(parser):
    parser.addoption("--skip-acceptance", action="store_true",
                     help="skip the long-running acceptance suite")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-acceptance"):
        skip = pytest.mark.skip(reason="--skip-acceptance given")
        for item in items:
            if "acceptance" in item.keywords:
                item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def two_line_data(n_per=40, seed=0, noise=0.5):
    """Two well separated lines in one covariate plus intercept."""
    r = np.random.default_rng(seed)
    x = r.uniform(0, 10, 2 * n_per)
    X = np.column_stack([np.ones_like(x), x])
    z = np.repeat([0, 1], n_per)
    B = np.array([[-4.0, 2.0], [3.0, -0.5]])
    y = np.einsum("ij,ij->i", X, B[z]) + noise * r.standard_normal(x.size)
    return build_dataset(X, y), z


@pytest.fixture
def two_lines():
    return two_line_data()


@pytest.fixture
def small_1d():
    """p = 1, n = 20 regression through the origin."""
    r = np.random.default_rng(7)
    x = r.uniform(0.5, 2.0, 20)
    y = 1.5 * x + 0.7 * r.standard_normal(20)
    return build_dataset(x[:, None], y)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
