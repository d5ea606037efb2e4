import numpy as np
import pytest


def rand_psd(rng, n, jitter=0.05):
    """Random well-conditioned PSD matrix with O(1) scale."""
    A = rng.standard_normal((n, n + 2)) / np.sqrt(n + 2)
    return A @ A.T + jitter * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
