import sys

import numpy as np
import pytest


def random_spd(rng, d, spread=1.0):
    """A random SPD matrix with eigenvalues in roughly [e^-spread, e^spread]."""
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    lam = np.exp(rng.uniform(-spread, spread, size=d))
    M = (Q * lam) @ Q.T
    return 0.5 * (M + M.T)


def random_normal1d(rng, n=1):
    out = np.column_stack([rng.normal(size=n), rng.uniform(0.3, 3.0, size=n)])
    return out[0] if n == 1 else out


def random_elliptical(rng, d, spread=0.7):
    return rng.normal(size=d), random_spd(rng, d, spread)


def random_simplex(rng, d):
    p = rng.dirichlet(np.ones(d))
    p = np.maximum(p, 1e-6)
    return p / p.sum()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "REPORT_LINES", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


GOLDEN_P0 = np.array([[1.5, 1.0], [1.0, 1.0]])
GOLDEN_P1 = np.array([[2.0, 1.0], [1.0, 1.0]])
GOLDEN_RHO = np.log(2.0) / np.sqrt(2.0)
