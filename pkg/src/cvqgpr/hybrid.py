"""Exact hybrid discrete/continuous-variable simulation.

Conventions: hbar = 1, vacuum quadrature variance 1/2.  The resource pair
starts in the product squeezed state with wavefunction proportional to
exp(-(q^2 + q~^2) / (2 xi^2)), i.e. q-variance xi^2/2 and p-variance
1/(2 xi^2) per mode.

Every evolution in the pipeline has the form (discrete Hermitian A) (x)
p_R p~_R, so each eigenbranch of A stays exactly Gaussian: the only CV
operation ever applied is the shear exp(i theta p p~), and a branch is
fully described by its accumulated shear angle.  A state is therefore a
finite sum over branches of (discrete vector) (x) (sheared squeezed
pair); overlaps between branches are available in closed form over the
full plane and reduce to a single Gauss-Legendre integral of an
erf-expressible integrand over the homodyne window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import wofz

from .errors import InputError

HERMITICITY_TOL = 1e-12

# branches whose shear angles agree to this resolution are merged
SHEAR_RESOLUTION = 1e-12

# eigenvalues of a coupled discrete operator are clustered at this scale
EIGENVALUE_RESOLUTION = 1e-12

WINDOW_NODES = 160  # Gauss-Legendre nodes for the bulk window overlaps

_GRAM_CHUNK = 2_000_000  # max pair*node values held at once


# ---------------------------------------------------------------------------
# Gaussian resource pair


def sheared_wavefunction(xi: float, theta, q, q_tilde):
    """Position wavefunction of exp(i theta p p~) |Phi(xi)>.

    The overall normalization is fixed so theta = 0 reproduces the bare
    squeezed pair (1/(sqrt(pi) xi)) exp(-(q^2 + q~^2)/(2 xi^2)).
    """
    theta = np.asarray(theta, dtype=float)
    den = xi**4 + theta**2
    pref = xi / (np.sqrt(np.pi) * np.sqrt(den))
    expo = -(xi**2 * (np.asarray(q) ** 2 + np.asarray(q_tilde) ** 2)
             + 2j * theta * np.asarray(q) * np.asarray(q_tilde)) / (2.0 * den)
    return pref * np.exp(expo)


def overlap_closed_form(lambda_eff: float, xi: float, gamma: float, q, q_tilde):
    """<q, q~| exp(i gamma lambda_eff p_R p~_R) |Phi(xi)> in closed form."""
    if not xi > 0:
        raise InputError("xi must be positive")
    return sheared_wavefunction(xi, gamma * lambda_eff, q, q_tilde)


def shear_overlap(xi: float, theta_bra, theta_ket):
    """Full-plane overlap of two sheared pairs: depends only on the shear
    difference, <psi_a|psi_b> = 2 xi^2 / sqrt(4 xi^4 + (b-a)^2)."""
    d = np.asarray(theta_ket, dtype=float) - np.asarray(theta_bra, dtype=float)
    return 2.0 * xi * xi / np.sqrt(4.0 * xi**4 + d * d)


def shear_overlap_matrix(xi: float, thetas_bra, thetas_ket) -> np.ndarray:
    return shear_overlap(xi, np.asarray(thetas_bra, dtype=float)[:, None],
                         np.asarray(thetas_ket, dtype=float)[None, :])


def _window_params(xi, theta_bra, theta_ket):
    za = 1.0 / (xi**4 + theta_bra**2)
    zb = 1.0 / (xi**4 + theta_ket**2)
    a = 0.5 * xi * xi * (za + zb)
    b = theta_ket * zb - theta_bra * za
    c = xi * xi / (np.pi * np.sqrt((xi**4 + theta_bra**2) * (xi**4 + theta_ket**2)))
    return a, b, c


def _stabilized_re_erf(x, y):
    """exp(-y^2) * Re erf(x + i y), overflow-free via the Faddeeva function."""
    return np.exp(-y * y) - np.real(np.exp(-x * x - 2j * x * y) * wofz(-y + 1j * x))


_SUPPORT_LOG = 92.0  # exp(-92) ~ 1e-40: integrand support cutoff


def window_overlap(xi: float, theta_bra: float, theta_ket: float,
                   half_width: float) -> float:
    """<psi_bra| Pi_w |psi_ket> over the square window [-w, w]^2.

    Adaptive quadrature of the analytically reduced 1-D integrand
    (absolute tolerance 1e-10 or better); the value is real because the
    window is symmetric.
    """
    a, b, c = _window_params(xi, float(theta_bra), float(theta_ket))
    sa = np.sqrt(a)
    x = sa * half_width

    def integrand(q):
        y = b * q / (2.0 * sa)
        return np.exp(-a * q * q) * np.sqrt(np.pi / a) * _stabilized_re_erf(x, y)

    # windows much wider than the Gaussian would starve the quadrature
    reach = min(half_width, float(np.sqrt(_SUPPORT_LOG / a)))
    val, _ = quad(integrand, -reach, reach,
                  epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(c * val)


def window_overlap_matrix(xi: float, thetas, half_width: float,
                          nodes: int = WINDOW_NODES) -> np.ndarray:
    """All-pairs window overlaps, vectorized over fixed Gauss-Legendre nodes.

    Node count 160 reproduces the adaptive scalar quadrature to well below
    1e-10 absolute (the integrand is an entire function of q).
    """
    thetas = np.asarray(thetas, dtype=float)
    nb = thetas.shape[0]
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    out = np.empty((nb, nb))
    iu, ju = np.triu_indices(nb)
    chunk = max(1, _GRAM_CHUNK // nodes)
    for start in range(0, iu.shape[0], chunk):
        ii = iu[start:start + chunk]
        jj = ju[start:start + chunk]
        a, b, c = _window_params(xi, thetas[ii][:, None], thetas[jj][:, None])
        sa = np.sqrt(a)
        x = sa * half_width
        # per-pair node placement clipped to the Gaussian support
        reach = np.minimum(half_width, np.sqrt(_SUPPORT_LOG / a))
        q = reach * xg[None, :]
        wq = reach * wg[None, :]
        y = b * q / (2.0 * sa)
        vals = np.sum(wq * np.exp(-a * q**2)
                      * np.sqrt(np.pi / a) * _stabilized_re_erf(x, y), axis=1)
        vals = (c[:, 0] * vals)
        out[ii, jj] = vals
        out[jj, ii] = vals
    return out


def make_squeezed_pair(xi: float) -> "GaussianPair":
    """The resource pair the protocol starts from; see module conventions."""
    if not xi > 0:
        raise InputError("xi must be positive")
    return GaussianPair(xi=float(xi))


@dataclass(frozen=True)
class GaussianPair:
    """Pure two-mode Gaussian state exp(i shear p p~) |Phi(xi)>.

    ``mean_vector`` and ``covariance`` use quadrature ordering
    (q_R, q~_R, p_R, p~_R); the Heisenberg map of the shear sends
    q -> q - shear * p~ and q~ -> q~ - shear * p (so the position
    distribution widens while <q p~> turns negative for shear > 0,
    matching the exact wavefunction).
    """

    xi: float
    shear: float = 0.0
    phase: complex = 1.0 + 0.0j

    @property
    def mean_vector(self) -> np.ndarray:
        return np.zeros(4)

    @property
    def symplectic(self) -> np.ndarray:
        s = np.eye(4)
        s[0, 3] = -self.shear
        s[1, 2] = -self.shear
        return s

    @property
    def covariance(self) -> np.ndarray:
        v0 = np.diag([self.xi**2 / 2, self.xi**2 / 2,
                      1 / (2 * self.xi**2), 1 / (2 * self.xi**2)])
        s = self.symplectic
        return s @ v0 @ s.T

    def wavefunction(self, q, q_tilde):
        return self.phase * sheared_wavefunction(self.xi, self.shear, q, q_tilde)


@dataclass(frozen=True)
class HomodyneWindow:
    """Post-selection square [-xi, xi]^2 in the (q_R, q~_R) outcomes."""

    xi: float

    def __post_init__(self):
        if not self.xi > 0:
            raise InputError("window half-width must be positive")


# ---------------------------------------------------------------------------
# Discrete registers


@dataclass(frozen=True)
class Register:
    name: str
    dim: int


class RegisterLayout:
    """Ordered named tensor factors of the discrete register."""

    def __init__(self, *factors: Register):
        if len({f.name for f in factors}) != len(factors):
            raise InputError("register names must be unique")
        self.factors = tuple(factors)

    @property
    def dims(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.factors else 1

    @property
    def names(self) -> tuple:
        return tuple(f.name for f in self.factors)

    def axis(self, name: str) -> int:
        for i, f in enumerate(self.factors):
            if f.name == name:
                return i
        raise InputError(f"no register named {name!r}")

    def with_register(self, reg: Register, position: int = 0) -> "RegisterLayout":
        factors = list(self.factors)
        factors.insert(position, reg)
        return RegisterLayout(*factors)

    def without_register(self, name: str) -> "RegisterLayout":
        return RegisterLayout(*(f for f in self.factors if f.name != name))

    def __eq__(self, other):
        return isinstance(other, RegisterLayout) and self.factors == other.factors

    def __repr__(self):
        inner = ", ".join(f"{f.name}[{f.dim}]" for f in self.factors)
        return f"RegisterLayout({inner})"


@dataclass(frozen=True)
class DiscreteOperator:
    """A matrix acting on the named subset of registers (kron in the
    order the names are listed)."""

    matrix: np.ndarray
    registers: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix))
        object.__setattr__(self, "registers", tuple(self.registers))

    def require_hermitian(self) -> None:
        dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if dev > HERMITICITY_TOL:
            raise InputError(f"operator is not Hermitian (deviation {dev:.2e})")


def _apply_matrix(vectors: np.ndarray, layout: RegisterLayout,
                  matrix: np.ndarray, registers: tuple) -> np.ndarray:
    """Apply ``matrix`` on the named register axes of stacked branch vectors."""
    nb = vectors.shape[0]
    dims = layout.dims
    axes = tuple(layout.axis(r) + 1 for r in registers)
    sub = int(np.prod([dims[layout.axis(r)] for r in registers]))
    if matrix.shape != (sub, sub):
        raise InputError(f"operator dim {matrix.shape} does not match registers "
                         f"{registers} with total dim {sub}")
    rest = tuple(i for i in range(1, len(dims) + 1) if i not in axes)
    vt = vectors.reshape((nb, *dims)).transpose((0, *axes, *rest))
    shape = vt.shape
    vt = vt.reshape(nb, sub, -1)
    out = np.matmul(matrix, vt)
    out = out.reshape(shape).transpose(np.argsort((0, *axes, *rest)))
    return np.ascontiguousarray(out).reshape(nb, -1)


def _merge_branches(shears: np.ndarray, vectors: np.ndarray):
    """Coalesce branches whose shear angles agree within SHEAR_RESOLUTION
    and drop exactly-zero branches."""
    keys = np.round(shears / SHEAR_RESOLUTION).astype(np.int64)
    order = np.argsort(keys, kind="stable")
    out_sh, out_vec = [], []
    i = 0
    while i < len(order):
        j = i
        acc = vectors[order[i]].copy()
        while j + 1 < len(order) and keys[order[j + 1]] == keys[order[i]]:
            j += 1
            acc += vectors[order[j]]
        if np.any(acc != 0):
            out_sh.append(shears[order[i]])
            out_vec.append(acc)
        i = j + 1
    if not out_sh:  # keep a single null branch rather than an empty state
        return np.zeros(1), np.zeros((1, vectors.shape[1]), dtype=complex)
    return np.asarray(out_sh), np.asarray(out_vec)


class BranchedHybridState:
    """Sum over branches of (discrete vector) (x) (sheared resource pair).

    ``window`` marks a state that has been projected by the homodyne
    window: expectation values then weight branch overlaps by the window
    Gram matrix, and further coupled evolutions are refused.

    ``oracle_index`` is the classical pointer standing in for the oracle
    selector register, which never entangles with anything (the oracle is
    index-diagonal and the permutation is a deterministic shift).
    """

    def __init__(self, layout: RegisterLayout, xi: float, shears, vectors,
                 window: HomodyneWindow | None = None, oracle_index: int = 1):
        self.layout = layout
        self.xi = float(xi)
        self.shears = np.asarray(shears, dtype=float).ravel()
        self.vectors = np.ascontiguousarray(np.asarray(vectors, dtype=complex))
        if self.vectors.ndim != 2 or self.vectors.shape != (self.shears.shape[0], layout.dim):
            raise InputError("vectors must have shape (branches, layout.dim)")
        self.window = window
        self.oracle_index = oracle_index
        self._gram = None

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_vector(cls, layout: RegisterLayout, xi: float, vector,
                    shear: float = 0.0) -> "BranchedHybridState":
        return cls(layout, xi, [shear], np.asarray(vector, dtype=complex)[None, :])

    def _replace(self, **kw) -> "BranchedHybridState":
        args = dict(layout=self.layout, xi=self.xi, shears=self.shears,
                    vectors=self.vectors, window=self.window,
                    oracle_index=self.oracle_index)
        args.update(kw)
        return BranchedHybridState(**args)

    # -- inspection ------------------------------------------------------------

    @property
    def branch_count(self) -> int:
        return self.shears.shape[0]

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def branches(self):
        """(amplitude vector, GaussianPair) pairs, one per branch."""
        return [(self.vectors[b].copy(), GaussianPair(self.xi, float(self.shears[b])))
                for b in range(self.branch_count)]

    def gram(self) -> np.ndarray:
        """Branch-pair CV overlaps: windowed Gram if projected, else full-plane."""
        if self._gram is None:
            if self.window is None:
                self._gram = shear_overlap_matrix(self.xi, self.shears, self.shears)
            else:
                self._gram = window_overlap_matrix(self.xi, self.shears, self.window.xi)
        return self._gram

    def norm_squared(self) -> float:
        g = self.gram()
        disc = self.vectors.conj() @ self.vectors.T
        return float(np.real(np.sum(disc * g)))

    def normalized(self) -> "BranchedHybridState":
        n2 = self.norm_squared()
        if n2 <= 0:
            raise InputError("cannot normalize a null state")
        return self._replace(vectors=self.vectors / np.sqrt(n2))

    def overlap(self, other: "BranchedHybridState") -> complex:
        """<self|other> with full-plane CV overlaps (unwindowed states)."""
        if self.window is not None or other.window is not None:
            raise InputError("overlap is defined for unprojected states")
        g = shear_overlap_matrix(self.xi, self.shears, other.shears)
        return complex(np.einsum("ad,ab,bd->", self.vectors.conj(), g, other.vectors))

    # -- register plumbing -----------------------------------------------------

    def add_register(self, reg: Register, init_vector, position: int = 0):
        init = np.asarray(init_vector, dtype=complex).ravel()
        if init.shape[0] != reg.dim:
            raise InputError("initial vector does not match register dim")
        layout = self.layout.with_register(reg, position)
        nb = self.branch_count
        vt = self.vectors.reshape((nb, *self.layout.dims))
        vt = np.expand_dims(vt, axis=1 + position)
        shape = [1] * vt.ndim
        shape[1 + position] = reg.dim
        vt = vt * init.reshape(shape)
        return BranchedHybridState(layout, self.xi, self.shears,
                                   vt.reshape(nb, -1), self.window, self.oracle_index)

    def project_register(self, name: str, target_vector):
        """Contract one register against a target state.

        Returns the (unnormalized) conditioned state, with the register
        removed, and the success probability relative to this state's norm.
        """
        target = np.asarray(target_vector, dtype=complex).ravel()
        axis = self.layout.axis(name)
        if target.shape[0] != self.layout.dims[axis]:
            raise InputError("target vector does not match register dim")
        nb = self.branch_count
        vt = self.vectors.reshape((nb, *self.layout.dims))
        out = np.tensordot(vt, target.conj(), axes=([1 + axis], [0]))
        new = BranchedHybridState(self.layout.without_register(name), self.xi,
                                  self.shears, out.reshape(nb, -1),
                                  self.window, self.oracle_index)
        prob = new.norm_squared() / self.norm_squared()
        return new, prob

    def expectation(self, op: "DiscreteOperator") -> float:
        return discrete_expectation(self, op)

    def reduced_density_matrix(self, name: str) -> np.ndarray:
        """Reduced discrete density matrix of one register (CV and the other
        registers traced out, with exact cross-branch Gaussian overlaps)."""
        axis = self.layout.axis(name)
        nb = self.branch_count
        vt = self.vectors.reshape((nb, *self.layout.dims))
        vt = np.moveaxis(vt, 1 + axis, 1).reshape(nb, self.layout.dims[axis], -1)
        g = self.gram()
        return np.einsum("ais,ab,bjs->ij", vt.conj(), g, vt)


# ---------------------------------------------------------------------------
# Operations


def apply_discrete_unitary(state: BranchedHybridState,
                           op: DiscreteOperator) -> BranchedHybridState:
    """Apply a purely discrete operator branch-by-branch (no CV action)."""
    if state.window is not None:
        raise InputError("cannot evolve a window-projected state")
    vecs = _apply_matrix(state.vectors, state.layout, op.matrix, op.registers)
    return state._replace(vectors=vecs)


def apply_coupled_evolution(state: BranchedHybridState, op: DiscreteOperator,
                            alpha: float) -> BranchedHybridState:
    """Apply exp(i alpha A (x) p_R p~_R) for Hermitian discrete A.

    Branches are re-expressed in A's eigenbasis; the branch with
    eigenvalue lam picks up the CV shear alpha * lam.  Eigenvalues equal
    within EIGENVALUE_RESOLUTION share one branch.
    """
    if state.window is not None:
        raise InputError("cannot evolve a window-projected state")
    op.require_hermitian()
    if alpha == 0.0:
        return state
    w, u = np.linalg.eigh(op.matrix)
    coords = _apply_matrix(state.vectors, state.layout, u.conj().T, op.registers)
    keys = np.round(w / EIGENVALUE_RESOLUTION).astype(np.int64)
    new_shears, new_vectors = [], []
    for key in np.unique(keys):
        cols = np.flatnonzero(keys == key)
        lam = float(w[cols].mean())
        sel = np.zeros((w.shape[0], w.shape[0]))
        sel[cols, cols] = 1.0
        part = _apply_matrix(coords, state.layout, u @ sel, op.registers)
        new_shears.append(state.shears + alpha * lam)
        new_vectors.append(part)
    shears = np.concatenate(new_shears)
    vectors = np.concatenate(new_vectors, axis=0)
    shears, vectors = _merge_branches(shears, vectors)
    return state._replace(shears=shears, vectors=vectors)


def window_project(state: BranchedHybridState, window: HomodyneWindow):
    """Project both resource modes' q-outcomes into the window square.

    Returns the unnormalized conditioned state and the success probability
    relative to the input state's norm; reprojection with the same window
    is exactly idempotent.
    """
    if state.window is not None:
        eff = HomodyneWindow(min(state.window.xi, window.xi))
    else:
        eff = window
    projected = state._replace(window=eff)
    prob = projected.norm_squared() / state.norm_squared()
    return projected, float(prob)


def discrete_expectation(state: BranchedHybridState, op: DiscreteOperator) -> float:
    """<state| O (x) I_modes |state> including cross-branch Gaussian overlaps.

    On an unnormalized (e.g. window-projected) state this is the raw
    quadratic form; callers choose the normalization explicitly.
    """
    op.require_hermitian()
    ovecs = _apply_matrix(state.vectors, state.layout, op.matrix, op.registers)
    g = state.gram()
    val = np.einsum("ad,ab,bd->", state.vectors.conj(), g, ovecs)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise InputError(f"expectation has non-negligible imaginary part {val.imag:.2e}")
    return float(val.real)
