import numpy as np
import pytest

from adaptive_qse.core import MINUS, MINUS_I, PLUS, PLUS_I, UP


def haar_samples(dim, n, seed):
    """Haar pure states straight from numpy, independent of the package sampler."""
    g = np.random.default_rng(seed)
    z = g.standard_normal((n, dim)) + 1j * g.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def mc_moment(outcomes, samples):
    """Normalized posterior mean of |psi><psi| by importance weighting Haar samples."""
    w = np.ones(len(samples))
    for phi in outcomes:
        w *= np.abs(samples @ np.conj(phi)) ** 2
    rho = (samples.T * w) @ samples.conj()
    return rho / w.sum()


def random_states(dim, n, seed):
    return list(haar_samples(dim, n, seed))


def axis_count_outcomes(k1, k2, k3):
    return [UP] * k1 + [PLUS] * k2 + [MINUS] * k2 + [PLUS_I] * k3 + [MINUS_I] * k3


@pytest.fixture
def table1_outcomes():
    return [UP, PLUS, PLUS_I]


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
