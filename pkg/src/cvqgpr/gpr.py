"""Classical Gaussian process regression with a zero mean function.

This module is both the baseline oracle the quantum pipeline is measured
against and the factory for the covariance objects it consumes.  All
matrix work goes through the symmetric eigendecomposition so that the
spectrum is available for conditioning diagnostics and noise dilution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, InputError

KERNEL_FAMILIES = ("squared-exponential", "linear", "constant")

DEFAULT_CONDITION_CAP = 1e8


@dataclass(frozen=True)
class KernelSpec:
    """Covariance function: family plus length-scale and amplitude."""

    family: str = "squared-exponential"
    length_scale: float = 1.0
    amplitude: float = 1.0  # a^2, the kernel value at zero distance

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; "
                             f"expected one of {KERNEL_FAMILIES}")
        if not self.length_scale > 0:
            raise InputError("length_scale must be positive")
        if not self.amplitude > 0:
            raise InputError("amplitude must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Homoskedastic target-noise variance sigma^2 >= 0."""

    sigma2: float = 0.0

    def __post_init__(self):
        if self.sigma2 < 0 or not np.isfinite(self.sigma2):
            raise InputError("sigma2 must be finite and non-negative")


@dataclass(frozen=True)
class TrainingSet:
    """N observed inputs (d-vectors) with scalar targets."""

    inputs: np.ndarray   # (N, d)
    targets: np.ndarray  # (N,)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float).ravel()
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        if inputs.shape[0] != targets.shape[0]:
            raise InputError("inputs and targets disagree on N")
        if inputs.shape[0] < 1:
            raise InputError("training set must contain at least one point")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise InputError("training data must be finite")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class CovarianceSystem:
    """The data the posterior (classical or quantum) is computed from.

    K includes the noise term: K_ij = k(x_i, x_j) + sigma2 * delta_ij.
    """

    matrix: np.ndarray       # (N, N) symmetric
    k_star: np.ndarray       # (N,)
    k_star_star: float
    sigma2: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "k_star", np.asarray(self.k_star, dtype=float).ravel())
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError("covariance matrix must be square")
        if not np.array_equal(m, m.T):
            raise InputError("covariance matrix must be exactly symmetric")
        if self.k_star.shape[0] != m.shape[0]:
            raise InputError("k_star length must match the matrix size")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PosteriorResult:
    """Posterior mean/variance at one test point plus k~* = K^{-1} k*."""

    mean: float
    variance: float
    k_tilde: np.ndarray
    condition_number: float


def kernel_eval(spec: KernelSpec, x: np.ndarray, x_prime: np.ndarray) -> float:
    """Evaluate the covariance function k(x, x').

    Parameters
    ----------
    spec : KernelSpec
        Kernel family and hyperparameters.
    x, x_prime : array_like
        Input points of equal dimension.

    Returns
    -------
    float
        Squared-exponential: ``a^2 * exp(-||x - x'||^2 / (2 l^2))``.
        Linear: ``a^2 * (x . x')``.  Constant: ``a^2``.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape:
        raise InputError(f"dimension mismatch: {x.shape[0]} vs {x_prime.shape[0]}")
    if spec.family == "squared-exponential":
        sq = float(np.sum((x - x_prime) ** 2))
        return spec.amplitude * float(np.exp(-sq / (2.0 * spec.length_scale**2)))
    if spec.family == "linear":
        return spec.amplitude * float(np.dot(x, x_prime))
    return spec.amplitude


def build_covariance_system(data: TrainingSet, spec: KernelSpec,
                            noise: NoiseModel, x_star: np.ndarray) -> CovarianceSystem:
    """Assemble K, k*, and k** for a single test point.

    The Gram matrix is filled in its upper triangle and mirrored so it is
    symmetric bit-for-bit, not merely up to rounding.
    """
    x_star = np.asarray(x_star, dtype=float).ravel()
    if x_star.shape[0] != data.d:
        raise InputError(f"test point has dimension {x_star.shape[0]}, data has {data.d}")
    n = data.n
    k = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            v = kernel_eval(spec, data.inputs[i], data.inputs[j])
            k[i, j] = v
            k[j, i] = v
    k[np.diag_indices(n)] += noise.sigma2
    k_star = np.array([kernel_eval(spec, data.inputs[i], x_star) for i in range(n)])
    k_star_star = kernel_eval(spec, x_star, x_star)
    return CovarianceSystem(k, k_star, k_star_star, noise.sigma2)


def condition_number(matrix: np.ndarray) -> float:
    """Ratio of the largest to smallest eigenvalue magnitude of a symmetric matrix.

    Returns ``inf`` when the smallest magnitude is exactly zero.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.allclose(matrix, matrix.T, atol=0.0, rtol=0.0):
        raise InputError("condition_number expects a symmetric matrix")
    mags = np.abs(np.linalg.eigvalsh(matrix))
    lo = mags.min()
    if lo == 0.0:
        return float("inf")
    return float(mags.max() / lo)


def classical_posterior(system: CovarianceSystem, y: np.ndarray,
                        condition_cap: float = DEFAULT_CONDITION_CAP) -> PosteriorResult:
    """Exact GPR posterior via eigendecomposition of K.

    Raises :class:`ConditioningError` when the condition number of K
    exceeds ``condition_cap`` (default 1e8).
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != system.n:
        raise InputError("target vector length must match the system size")
    kappa = condition_number(system.matrix)
    if not np.isfinite(kappa) or kappa > condition_cap:
        raise ConditioningError(
            f"condition number {kappa:.3e} exceeds cap {condition_cap:.3e}; "
            "consider noise dilution")
    w, v = np.linalg.eigh(system.matrix)
    k_tilde = v @ ((v.T @ system.k_star) / w)
    mean = float(y @ k_tilde)
    variance = float(system.k_star_star - system.k_star @ k_tilde)
    return PosteriorResult(mean, variance, k_tilde, kappa)


def noise_dilution(matrix: np.ndarray, sigma2: float, lambda_floor: float) -> float:
    """Smallest sigma2' >= sigma2 lifting the spectrum of K above ``lambda_floor``.

    ``matrix`` is K as built with noise ``sigma2``; replacing sigma2 by the
    returned sigma2' shifts every eigenvalue up by exactly sigma2' - sigma2.
    """
    if not lambda_floor > 0:
        raise InputError("lambda_floor must be positive")
    lam_min = float(np.linalg.eigvalsh(np.asarray(matrix, dtype=float)).min())
    return sigma2 + max(0.0, lambda_floor - lam_min)
