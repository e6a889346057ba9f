import numpy as np
import pytest


def random_cov(rng, p, n=None):
    """Sample covariance of a random standardized Gaussian draw."""
    n = n or 3 * p + 5
    A = rng.standard_normal((p, p))
    X = rng.standard_normal((n, p)) @ A
    X = (X - X.mean(0)) / X.std(0, ddof=1)
    S = X.T @ X / (n - 1)
    return (S + S.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
