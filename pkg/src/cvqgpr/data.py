"""Training-set I/O and synthetic data generation.

CSV layout: header row ``x1,...,xd,y``, one observation per row,
decimal-point reals, UTF-8.
"""

from __future__ import annotations

import csv
import warnings

import numpy as np

from .errors import InputError
from .gpr import KernelSpec, NoiseModel, TrainingSet, kernel_eval


def load_dataset(path) -> TrainingSet:
    """Parse a training-set CSV, rejecting NaN/Inf and ragged rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file")
        d = len(header) - 1
        if d < 1 or header[-1].strip() != "y":
            raise InputError(f"{path}: header must be x1,...,xd,y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise InputError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                vals = [float(cell) for cell in row]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            if not all(np.isfinite(v) for v in vals):
                raise InputError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no observations (header only)")
    arr = np.asarray(rows, dtype=float)
    return TrainingSet(arr[:, :d], arr[:, d])


def save_dataset(data: TrainingSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(data.d)] + ["y"])
        for x, y in zip(data.inputs, data.targets):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def generate_synthetic(n: int, d: int, kernel: KernelSpec, noise: NoiseModel,
                       seed: int) -> TrainingSet:
    """Draw inputs uniformly from [-1, 1]^d and targets from the GP prior.

    Targets are an exact multivariate-normal sample through the Cholesky
    factor of the Gram matrix; a numerically non-PSD Gram matrix is
    regularized with 1e-10 * I and a warning.
    """
    if n < 1 or d < 1:
        raise InputError("n and d must be at least 1")
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(-1.0, 1.0, size=(n, d))
    gram = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            v = kernel_eval(kernel, inputs[i], inputs[j])
            gram[i, j] = v
            gram[j, i] = v
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        warnings.warn("Gram matrix not numerically PSD; regularizing with 1e-10*I")
        chol = np.linalg.cholesky(gram + 1e-10 * np.eye(n))
    targets = chol @ rng.standard_normal(n)
    if noise.sigma2 > 0:
        targets = targets + np.sqrt(noise.sigma2) * rng.standard_normal(n)
    return TrainingSet(inputs, targets)
