import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, p, eig_low=0.1, eig_high=3.0):
    """SPD matrix with eigenvalues in a controlled band."""
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    eigs = rng.uniform(eig_low, eig_high, size=p)
    m = (q * eigs) @ q.T
    return 0.5 * (m + m.T)
