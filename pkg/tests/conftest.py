import numpy as np
import pytest

from finslerkit import Euclidean, EvenPNorm, Randers

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0.0, np.log(cond), n))
    return Q @ np.diag(w) @ Q.T


def catalog(n):
    """Named norms used across the suite."""
    e = np.zeros(n)
    e[0] = 1.0
    return {
        "euclid": Euclidean(np.eye(n)),
        "quartic": EvenPNorm(4, n),
        "randers-0.2": Randers(np.eye(n), 0.2 * e),
        "randers-0.5": Randers(np.eye(n), 0.5 * e),
    }
