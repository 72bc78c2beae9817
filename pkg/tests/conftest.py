"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the code paths they check:
determinants and inverses go through Laplace/cofactor expansion, matrix
exponentials through dense eigendecomposition of freshly materialized
matrices.
"""

import numpy as np
import pytest

from cvqgpr.gpr import KernelSpec, NoiseModel, TrainingSet, build_covariance_system


def cofactor_determinant(m: np.ndarray) -> float:
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += ((-1.0) ** j) * m[0, j] * cofactor_determinant(minor)
    return total


def adjugate_inverse(m: np.ndarray) -> np.ndarray:
    """Matrix inverse via the adjugate (cofactor) formula; O(n!) and proud."""
    n = m.shape[0]
    det = cofactor_determinant(m)
    adj = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
            cof = ((-1.0) ** (i + j)) * (cofactor_determinant(minor) if n > 1 else 1.0)
            adj[j, i] = cof
    return adj / det


def random_instance(rng, n: int, d: int, sigma2: float = 0.3):
    """A random SE-kernel system plus targets."""
    data = TrainingSet(rng.uniform(-1.0, 1.0, (n, d)), rng.normal(0.0, 1.0, n))
    kernel = KernelSpec("squared-exponential", 1.0, 1.0)
    system = build_covariance_system(data, kernel, NoiseModel(sigma2),
                                     rng.uniform(-1.0, 1.0, d))
    return data, kernel, system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
