"""One-sparse Hermitian dilation of the covariance matrix.

The embedded matrix Khat = diag(K, I) of size 2N is recorded in the
one-sparse Hermitian H on the doubled index space (x, y), x, y in
[0, 2N): row (x, y) has its single nonzero at column (y, x) with value
Khat[x, y].  Quantization replaces each entry h by the even integer
2*floor(h / (2 zeta)), and the integer matrix splits exactly into
one-sparse reflections with entries +-1.

Matrix norms written ``max`` here always mean the magnitude of the
largest matrix element, not the operator norm; both are exposed in
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecompositionError, InputError, QuantizationOverflowError

DENSE_DIM_CAP = 64  # dense materialization is a test-time convenience only

QUANTIZATION_ENTRY_CAP = 10**6


@dataclass(frozen=True)
class DilatedMatrix:
    """Block-diagonal [K, I] embedding, padded so N is a power of two."""

    khat: np.ndarray
    n_original: int
    n_padded: int

    @property
    def two_n(self) -> int:
        return self.khat.shape[0]

    @property
    def max_entry(self) -> float:
        """Magnitude of the largest matrix element (the norm convention
        used throughout the dilation bounds)."""
        return float(np.max(np.abs(self.khat)))

    @property
    def operator_norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.khat))))


def _next_power_of_two(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def embed_khat(k: np.ndarray) -> DilatedMatrix:
    """Embed K as diag(K, I), padding K with identity rows/columns first."""
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise InputError("K must be a square matrix")
    n = k.shape[0]
    n_pad = _next_power_of_two(n)
    padded = np.eye(n_pad)
    padded[:n, :n] = k
    khat = np.eye(2 * n_pad)
    khat[:n_pad, :n_pad] = padded
    return DilatedMatrix(khat, n, n_pad)


class OneSparseMatrix:
    """Symmetric matrix with at most one nonzero per row, stored as
    parallel (column, value) arrays indexed by row."""

    def __init__(self, cols: np.ndarray, vals: np.ndarray):
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals)
        if self.cols.shape != self.vals.shape or self.cols.ndim != 1:
            raise InputError("cols and vals must be equal-length 1-D arrays")

    @property
    def dim(self) -> int:
        return self.cols.shape[0]

    @property
    def max_entry(self) -> float:
        return float(np.max(np.abs(self.vals))) if self.dim else 0.0

    def entry(self, row: int, col: int):
        return self.vals[row] if self.cols[row] == col else type(self.vals[row])(0)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.result_type(self.vals, v))
        np.add.at(out, np.arange(self.dim), self.vals * v[self.cols])
        return out

    def to_dense(self) -> np.ndarray:
        if self.dim > DENSE_DIM_CAP:
            raise InputError(f"dense materialization capped at dim {DENSE_DIM_CAP}")
        dense = np.zeros((self.dim, self.dim), dtype=self.vals.dtype)
        dense[np.arange(self.dim), self.cols] = self.vals
        return dense

    def is_symmetric(self) -> bool:
        r = np.arange(self.dim)
        back = self.cols[self.cols]
        return bool(np.all((self.vals == 0) | ((back == r) & (self.vals[self.cols] == self.vals))))


def hermitian_dilation(khat: DilatedMatrix) -> OneSparseMatrix:
    """The one-sparse H: row (x, y) -> column (y, x) with value Khat[x, y]."""
    two_n = khat.two_n
    dim = two_n * two_n
    x, y = np.divmod(np.arange(dim), two_n)
    cols = y * two_n + x
    vals = khat.khat[x, y]
    return OneSparseMatrix(cols, vals)


def quantize(h: OneSparseMatrix, zeta: float,
             entry_cap: int = QUANTIZATION_ENTRY_CAP) -> OneSparseMatrix:
    """Round every entry h to the even integer 2*floor(h / (2 zeta)).

    floor (toward -inf) is used for negative entries too, which gives the
    uniform entrywise bound |h - zeta*m| <= 2*zeta.
    """
    if not zeta > 0:
        raise InputError("zeta must be positive")
    m = 2 * np.floor(h.vals / (2.0 * zeta)).astype(np.int64)
    if m.size and np.max(np.abs(m)) > entry_cap:
        raise QuantizationOverflowError(
            f"quantized entries reach {np.max(np.abs(m))}, above cap {entry_cap}; "
            "increase zeta")
    return OneSparseMatrix(h.cols.copy(), m)


class OneSparseReflection:
    """A symmetric signed permutation with entries +-1, so H_j^2 = I.

    Stored as an involutive permutation ``perm`` and a sign per row:
    column ``i`` has its single nonzero at row ``perm[i]`` with value
    ``signs[i]``.
    """

    def __init__(self, perm: np.ndarray, signs: np.ndarray):
        self.perm = np.asarray(perm, dtype=np.int64)
        self.signs = np.asarray(signs, dtype=np.int8)
        self.validate()

    @property
    def dim(self) -> int:
        return self.perm.shape[0]

    def validate(self) -> None:
        r = np.arange(self.dim)
        if not np.all(self.perm[self.perm] == r):
            raise DecompositionError("reflection permutation is not an involution")
        if not np.all(np.abs(self.signs) == 1):
            raise DecompositionError("reflection entries must be +-1")
        if not np.all(self.signs[self.perm] == self.signs):
            raise DecompositionError("reflection is not symmetric")

    def matvec(self, v: np.ndarray) -> np.ndarray:
        # (H v)[perm[i]] = signs[i] v[i]  <=>  (H v)[r] = signs[r] v[perm[r]]
        return self.signs * v[self.perm]

    def to_dense(self) -> np.ndarray:
        if self.dim > DENSE_DIM_CAP:
            raise InputError(f"dense materialization capped at dim {DENSE_DIM_CAP}")
        dense = np.zeros((self.dim, self.dim))
        dense[self.perm, np.arange(self.dim)] = self.signs
        return dense


def decompose_one_sparse(htilde: OneSparseMatrix) -> list[OneSparseReflection]:
    """Split an even-integer one-sparse symmetric matrix into reflections.

    Terms come in pairs (H_j+, H_j-), j = 1..max|m|/2: both place
    sign(m_xy) wherever |m_xy| >= 2j, and pad every uncovered row with +1
    (resp. -1) on the diagonal so the padding cancels in the sum while
    each term keeps exactly one +-1 per row.  The zero matrix decomposes
    to the empty list.
    """
    if not htilde.is_symmetric():
        raise InputError("htilde must be symmetric")
    vals = np.asarray(htilde.vals, dtype=np.int64)
    if np.any(vals % 2 != 0):
        raise InputError("htilde entries must be even integers")
    m_max = int(np.max(np.abs(vals))) if vals.size else 0
    terms: list[OneSparseReflection] = []
    identity = np.arange(htilde.dim)
    for j in range(1, m_max // 2 + 1):
        covered = np.abs(vals) >= 2 * j
        for pad_sign in (+1, -1):
            perm = identity.copy()
            signs = np.full(htilde.dim, pad_sign, dtype=np.int8)
            perm[covered] = htilde.cols[covered]
            signs[covered] = np.sign(vals[covered])
            terms.append(OneSparseReflection(perm, signs))
    return terms


@dataclass(frozen=True)
class OneSparseDecomposition:
    """zeta, the quantized H~, and the reflections summing to it exactly."""

    zeta: float
    htilde: OneSparseMatrix
    terms: list

    @property
    def j_max(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return self.htilde.dim


def build_decomposition(khat: DilatedMatrix, zeta: float) -> OneSparseDecomposition:
    h = hermitian_dilation(khat)
    htilde = quantize(h, zeta)
    return OneSparseDecomposition(zeta, htilde, decompose_one_sparse(htilde))


@dataclass(frozen=True)
class OracleQ:
    """Q = sum_j |j><j| (x) H_j, Hermitian and unitary (Q^2 = I).

    ``registers`` names the state factors the reflections act on (the
    selector index register is simulated as a classical pointer).
    """

    terms: list
    registers: tuple = ("swap", "data")

    def __post_init__(self):
        if not self.terms:
            raise InputError("oracle needs a nonempty term list")
        for t in self.terms:
            t.validate()

    @property
    def j_max(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    def to_dense(self) -> np.ndarray:
        """Dense Q on the (index (x) target) space, for small-dim checks."""
        blocks = [t.to_dense() for t in self.terms]
        dim = self.j_max * self.dim
        if dim > DENSE_DIM_CAP * 4:
            raise InputError("dense oracle materialization too large")
        out = np.zeros((dim, dim))
        for j, b in enumerate(blocks):
            sl = slice(j * self.dim, (j + 1) * self.dim)
            out[sl, sl] = b
        return out


def oracle_q(terms: list, registers: tuple = ("swap", "data")) -> OracleQ:
    """Bundle validated reflections into the query operator."""
    return OracleQ(list(terms), registers)


def dump_decomposition(decomp: OneSparseDecomposition, stream) -> None:
    """Debug dump: header with zeta and j_max, then lines ``j sign row col``."""
    stream.write(f"# zeta={decomp.zeta!r} j_max={decomp.j_max}\n")
    for j, term in enumerate(decomp.terms, start=1):
        for col in range(term.dim):
            stream.write(f"{j} {int(term.signs[col]):+d} {int(term.perm[col])} {col}\n")
