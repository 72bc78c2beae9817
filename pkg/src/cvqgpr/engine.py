"""Oracle-path evolution: M exponential-swap steps as an exact channel.

Each step couples a fresh symmetric register |s> to the state, runs the
permutation walk of conditioned fractional queries, and traces the
symmetric register out again.  The trace makes the output mixed; it is
kept as an ensemble of branched pure components, one per Kraus branch of
the swap register (the |s> row continues the component, each orthogonal
row spawns a "jump" component).  Components beyond the configured jump
depth stop spawning; the weight so dropped is exact bookkeeping
(channels preserve trace) and is reported, never silently lost.

Because every query shears the resource pair by the same angle beta,
component vectors live on a uniform shear lattice and one step is a
batch of small matrix multiplies with lattice shifts - the hot kernel in
:mod:`cvqgpr._kernels`.

The symmetric state used here is the normalized uniform vector over the
2N-dimensional swap register.  Contracting the one-sparse H against it
yields Khat/(2N) per unit walk angle, while the target step unitary
U_M = exp(sign * i gamma/(4MN) Khat N_hat p p~) carries 1/(4N); each
step therefore runs the walk at half the schedule's per-query fraction
(SWAP_DELTA_CALIBRATION below), which makes the M-step product converge
to the direct unitary at the documented 1/M rate.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .algorithm import walk_visit_indices
from .dilation import OneSparseDecomposition
from .errors import InputError
from .hybrid import (SHEAR_RESOLUTION, BranchedHybridState, DiscreteOperator,
                     HomodyneWindow, RegisterLayout, _apply_matrix,
                     shear_overlap_matrix, window_overlap_matrix)

SWAP_DELTA_CALIBRATION = 0.5


def symmetric_state(two_n: int) -> np.ndarray:
    """Normalized uniform state over the swap register."""
    return np.full(two_n, 1.0 / math.sqrt(two_n))


def complement_basis(vec: np.ndarray) -> np.ndarray:
    """Columns forming an orthonormal basis of the complement of ``vec``."""
    vec = np.asarray(vec, dtype=float)
    w, u = np.linalg.eigh(np.eye(vec.shape[0]) - np.outer(vec, vec))
    return u[:, w > 0.5]


def build_step_operators(decomposition: OneSparseDecomposition, visit: list):
    """Per-shift blocks of one walk step applied to |s> (x) (data, flag).

    Returns (a_main, a_jump): a_main[k] continues a component after the
    swap register is reset (<s| row), a_jump[x][k] is the row along the
    x-th complement direction.  Lattice shift = k - j_max.
    """
    two_n = int(round(math.sqrt(decomposition.dim)))
    if two_n * two_n != decomposition.dim:
        raise InputError("decomposition does not live on a square pair space")
    terms = [decomposition.terms[j - 1] for j in visit]
    d = two_n * 2
    jm = len(terms)
    kk = 2 * jm + 1
    s = symmetric_state(two_n)
    walk = np.zeros((kk, two_n, d, d), dtype=complex)
    for d0 in range(d):
        v = np.zeros((kk, two_n, two_n, 2), dtype=complex)
        dm0, f0 = divmod(d0, 2)
        v[jm, :, dm0, f0] = s
        for term in terms:
            vn = np.zeros_like(v)
            vn[..., 0] = v[..., 0]
            f1 = v[..., 1].reshape(kk, -1)
            hv = term.signs * f1[:, term.perm]
            plus = 0.5 * (f1 + hv)
            minus = 0.5 * (f1 - hv)
            vn[1:, :, :, 1] += plus[:-1].reshape(-1, two_n, two_n)
            vn[:-1, :, :, 1] += minus[1:].reshape(-1, two_n, two_n)
            v = vn
        walk[:, :, :, d0] = v.reshape(kk, two_n, d)
    a_main = np.einsum("x,kxde->kde", s, walk)
    comp = complement_basis(s)
    a_jump = np.einsum("xi,kxde->ikde", comp, walk)
    return np.ascontiguousarray(a_main), np.ascontiguousarray(a_jump)


class HybridEnsemble:
    """Mixed hybrid state: sum over components of |phi_c><phi_c|.

    Component vectors share one uniform shear lattice
    theta_i = (offset + i) * beta; ``vectors`` has shape (C, T, dim).
    """

    def __init__(self, layout: RegisterLayout, xi: float, beta: float,
                 offset: int, vectors: np.ndarray, depths: np.ndarray,
                 window: HomodyneWindow | None = None,
                 truncated_weight: float = 0.0, query_count: int = 0,
                 step_error_bound: float = 0.0):
        self.layout = layout
        self.xi = float(xi)
        self.beta = float(beta)
        self.offset = int(offset)
        self.vectors = np.ascontiguousarray(vectors, dtype=complex)
        self.depths = np.asarray(depths, dtype=np.int64)
        self.window = window
        self.truncated_weight = float(truncated_weight)
        self.query_count = int(query_count)
        self.step_error_bound = float(step_error_bound)
        self._gram = None

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_state(cls, state: BranchedHybridState, beta: float) -> "HybridEnsemble":
        """Lift a pure state whose branch shears sit on the beta-lattice."""
        if state.window is not None:
            raise InputError("cannot start oracle evolution from a projected state")
        if beta == 0.0:
            if np.any(state.shears != 0.0):
                raise InputError("beta = 0 requires all branch shears to be zero")
            vecs = state.vectors.sum(axis=0)[None, None, :]
            return cls(state.layout, state.xi, 0.0, 0, vecs, np.zeros(1))
        idx = state.shears / beta
        lattice = np.round(idx).astype(np.int64)
        if np.max(np.abs(idx - lattice)) * abs(beta) > SHEAR_RESOLUTION:
            raise InputError("branch shears do not sit on the step lattice")
        lo, hi = int(lattice.min()), int(lattice.max())
        vecs = np.zeros((1, hi - lo + 1, state.dim), dtype=complex)
        for site, vec in zip(lattice, state.vectors):
            vecs[0, site - lo] += vec
        return cls(state.layout, state.xi, beta, lo, vecs, np.zeros(1))

    # -- views -----------------------------------------------------------------

    @property
    def thetas(self) -> np.ndarray:
        if self.beta == 0.0:
            return np.zeros(self.vectors.shape[1])
        return (self.offset + np.arange(self.vectors.shape[1])) * self.beta

    @property
    def component_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def components(self) -> list:
        """Pure components as BranchedHybridState views (nonzero sites only)."""
        out = []
        thetas = self.thetas
        for c in range(self.component_count):
            mask = np.any(self.vectors[c] != 0, axis=1)
            if not mask.any():
                continue
            out.append(BranchedHybridState(self.layout, self.xi, thetas[mask],
                                           self.vectors[c][mask], self.window))
        return out

    def gram(self) -> np.ndarray:
        if self._gram is None:
            thetas = self.thetas
            if self.window is None:
                self._gram = shear_overlap_matrix(self.xi, thetas, thetas)
            else:
                self._gram = window_overlap_matrix(self.xi, thetas, self.window.xi)
        return self._gram

    def _quadratic_form(self, vectors_out: np.ndarray) -> float:
        g = self.gram()
        acc = 0.0 + 0.0j
        for d in range(self.vectors.shape[2]):
            z = g @ vectors_out[:, :, d].T  # (T, C)
            acc += np.sum(self.vectors[:, :, d].conj().T * z)
        return float(np.real(acc))

    def trace(self) -> float:
        """Sum of component norms (windowed when projected)."""
        return self._quadratic_form(self.vectors)

    def expectation(self, op: DiscreteOperator) -> float:
        """Sum over components of <phi_c| O (x) I |phi_c> (unnormalized)."""
        op.require_hermitian()
        c, t, d = self.vectors.shape
        flat = _apply_matrix(self.vectors.reshape(c * t, d), self.layout,
                             op.matrix, op.registers)
        return self._quadratic_form(flat.reshape(c, t, d))

    def compact(self, rel_tol: float = 0.0) -> "HybridEnsemble":
        """Trim lattice sites carrying at most ``rel_tol`` of the total
        (plain l2) mass; the dropped mass is added to truncated_weight."""
        mass = np.sum(np.abs(self.vectors) ** 2, axis=(0, 2))
        total = float(mass.sum())
        if total == 0.0:
            return self
        keep = mass > rel_tol * total
        if keep.all():
            return self
        dropped = float(mass[~keep].sum())
        idx = np.flatnonzero(keep)
        lo, hi = int(idx.min()), int(idx.max())
        inner = ~keep[lo:hi + 1]
        vecs = self.vectors[:, lo:hi + 1, :].copy()
        vecs[:, inner, :] = 0.0
        return HybridEnsemble(self.layout, self.xi, self.beta, self.offset + lo,
                              vecs, self.depths, self.window,
                              self.truncated_weight + dropped,
                              self.query_count, self.step_error_bound)


def window_project_ensemble(ens: HybridEnsemble, window: HomodyneWindow):
    """Project every component; probability is relative to the input trace."""
    if ens.window is not None:
        window = HomodyneWindow(min(ens.window.xi, window.xi))
    before = ens.trace()
    projected = HybridEnsemble(ens.layout, ens.xi, ens.beta, ens.offset,
                               ens.vectors, ens.depths, window,
                               ens.truncated_weight, ens.query_count,
                               ens.step_error_bound)
    return projected, projected.trace() / before


def _as_ensemble(obj, beta: float) -> HybridEnsemble:
    if isinstance(obj, HybridEnsemble):
        if obj.beta != 0.0 and beta != 0.0 and \
                abs(obj.beta - beta) > SHEAR_RESOLUTION:
            raise InputError("ensemble lattice spacing does not match the schedule")
        return obj
    return HybridEnsemble.from_state(obj, beta)


def run_swap_steps(obj, decomposition: OneSparseDecomposition, schedule,
                   sign: float = 1.0, jump_depth: int = 1,
                   n_steps: int | None = None,
                   compact_tol: float = 0.0) -> HybridEnsemble:
    """Apply ``n_steps`` exponential-swap steps (default: the full schedule).

    ``obj`` is a BranchedHybridState on (data, flag) registers or an
    ensemble from earlier steps.  Per-query fraction:
    SWAP_DELTA_CALIBRATION * schedule.delta (see module docstring).
    """
    if sign not in (1.0, -1.0, 1, -1):
        raise InputError("sign must be +1 or -1")
    per_query_delta = SWAP_DELTA_CALIBRATION * schedule.delta
    beta = float(sign) * math.pi * per_query_delta / 2.0
    ens = _as_ensemble(obj, beta)
    two_n = ens.layout.dims[ens.layout.axis("data")]
    if decomposition.dim != two_n * two_n:
        raise InputError("decomposition pair space does not match the data register")
    if ens.window is not None:
        raise InputError("cannot evolve a window-projected ensemble")
    steps = schedule.m_steps if n_steps is None else n_steps
    pointer = getattr(obj, "oracle_index", 1)
    visit = walk_visit_indices(pointer, decomposition.j_max)
    a_main, a_jump = build_step_operators(decomposition, visit)
    jm = decomposition.j_max
    if beta == 0.0:
        a_main = a_main.sum(axis=0)[None]
        a_jump = a_jump.sum(axis=1)[:, None]
        jm = 0
    trace_before = ens.trace()
    vectors, depths, offset = ens.vectors, ens.depths, ens.offset
    for _ in range(steps):
        moved = _kernels.propagate(vectors, a_main)
        spawn_rows = np.flatnonzero(depths < jump_depth)
        new_vecs = [moved]
        new_depths = [depths]
        if spawn_rows.size:
            src = np.ascontiguousarray(vectors[spawn_rows])
            for x in range(a_jump.shape[0]):
                new_vecs.append(_kernels.propagate(src, a_jump[x]))
                new_depths.append(depths[spawn_rows] + 1)
        vectors = np.concatenate(new_vecs, axis=0)
        depths = np.concatenate(new_depths)
        offset -= jm
        vectors, offset = _trim_support(vectors, offset)
    kmax = decomposition.zeta * decomposition.htilde.max_entry
    bound = (schedule.gamma / (schedule.m_steps * ens.xi**2)) ** 2 * kmax**2
    out = HybridEnsemble(ens.layout, ens.xi, beta, offset, vectors, depths,
                         None, 0.0,
                         ens.query_count + steps * decomposition.j_max, bound)
    out = out.compact(compact_tol)
    # the step channel preserves trace: whatever the kept components lost
    # is exactly the weight of the jumps suppressed at the depth cap
    out.truncated_weight = ens.truncated_weight + max(0.0, trace_before - out.trace())
    return out


def _trim_support(vectors: np.ndarray, offset: int):
    mask = np.any(vectors != 0, axis=(0, 2))
    if not mask.any():
        return vectors[:, :1, :], offset
    idx = np.flatnonzero(mask)
    lo, hi = int(idx.min()), int(idx.max())
    return np.ascontiguousarray(vectors[:, lo:hi + 1, :]), offset + lo


def exp_swap_step(obj, decomposition: OneSparseDecomposition, schedule,
                  sign: float = 1.0, jump_depth: int = 1) -> HybridEnsemble:
    """One step of the exponential swap (couple |s>, walk, trace out)."""
    return run_swap_steps(obj, decomposition, schedule, sign=sign,
                          jump_depth=jump_depth, n_steps=1)


# ---------------------------------------------------------------------------
# Trace distance


def _blocks_of(obj):
    """(xi, thetas, X (C, T, dim)) of a state or ensemble."""
    if isinstance(obj, HybridEnsemble):
        if obj.window is not None:
            raise InputError("trace distance is computed before projection")
        return obj.xi, obj.thetas, obj.vectors
    if obj.window is not None:
        raise InputError("trace distance is computed before projection")
    return obj.xi, obj.shears, obj.vectors[None, :, :]


def _cross_gram(xi, th_a, xa, th_b, xb) -> np.ndarray:
    """G[c, c'] = <phi_c | phi_c'> between two stacked component groups."""
    o = shear_overlap_matrix(xi, th_a, th_b)
    ca, ta, d = xa.shape
    cb = xb.shape[0]
    g = np.zeros((ca, cb), dtype=complex)
    for dd in range(d):
        z = o @ xb[:, :, dd].T  # (Ta, Cb)
        g += xa[:, :, dd].conj() @ z
    return g


def trace_distance(a, b) -> float:
    """Trace distance between two (possibly mixed) hybrid states.

    Both arguments may be BranchedHybridState or HybridEnsemble; all
    component vectors are expressed in an orthonormal basis of their
    joint span (closed-form full-plane Gaussian overlaps) and the
    eigenvalues of the difference operator are summed.
    """
    xi_a, th_a, xa = _blocks_of(a)
    xi_b, th_b, xb = _blocks_of(b)
    if abs(xi_a - xi_b) > 0:
        raise InputError("states must share the resource squeezing xi")
    ca, cb = xa.shape[0], xb.shape[0]
    g = np.zeros((ca + cb, ca + cb), dtype=complex)
    g[:ca, :ca] = _cross_gram(xi_a, th_a, xa, th_a, xa)
    g[ca:, ca:] = _cross_gram(xi_a, th_b, xb, th_b, xb)
    gab = _cross_gram(xi_a, th_a, xa, th_b, xb)
    g[:ca, ca:] = gab
    g[ca:, :ca] = gab.conj().T
    w, u = np.linalg.eigh(g)
    keep = w > 1e-13 * max(float(w.max()), 1.0)
    coords = np.sqrt(w[keep])[:, None] * u[:, keep].conj().T
    rho_a = coords[:, :ca] @ coords[:, :ca].conj().T
    rho_b = coords[:, ca:] @ coords[:, ca:].conj().T
    ev = np.linalg.eigvalsh(rho_a - rho_b)
    return float(0.5 * np.sum(np.abs(ev)))
