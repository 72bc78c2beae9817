"""Quantum-pipeline building blocks: amplitude encodings, the joint input
state, the fractional oracle query, the permutation walk, the direct
(reference) unitary, the readout observable, and parameter selection.

Register names used throughout: "data" (dimension 2N, holds the encoded
vectors), "flag" (the qubit distinguishing the |y> and |k*> branches;
N_hat = (I - Z)/2 acts here), "swap" (the symmetric register of the
exponential-swap construction), "ancilla" (the fractional-query qubit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dilation import DilatedMatrix, OneSparseDecomposition, OracleQ, oracle_q
from .errors import ConditioningError, DegenerateRunError, EncodingError, InputError
from .hybrid import (BranchedHybridState, DiscreteOperator, Register,
                     RegisterLayout, apply_coupled_evolution,
                     apply_discrete_unitary, make_squeezed_pair)

N_HAT = np.array([[0.0, 0.0], [0.0, 1.0]])
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)

DEFAULT_SCALE_MARGIN = 1.01  # c(v) = margin * max|v_i|; any margin > 1 works

MAX_RETRIES_DEFAULT = 1000


# ---------------------------------------------------------------------------
# Amplitude encoding


@dataclass(frozen=True)
class AmplitudeEncoding:
    """Unit-norm 2N-amplitude encoding of an N-vector with sign information.

    amplitudes[i] = v_i / (c sqrt(N)) and
    amplitudes[N+i] = sqrt(1 - v_i^2/c^2) / sqrt(N).
    """

    amplitudes: np.ndarray
    scale: float

    @property
    def n(self) -> int:
        return self.amplitudes.shape[0] // 2


def encode_vector(v, c_override: float | None = None) -> AmplitudeEncoding:
    """Encode an N-vector into 2N unit-norm amplitudes.

    The scale defaults to 1.01 * max|v_i| (1.0 for the zero vector) and
    must strictly exceed max|v_i| when overridden.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise EncodingError("vector must be nonempty and finite")
    vmax = float(np.max(np.abs(v)))
    if c_override is not None:
        if not c_override > vmax:
            raise EncodingError(f"scale {c_override} must exceed max|v_i| = {vmax}")
        c = float(c_override)
    else:
        c = DEFAULT_SCALE_MARGIN * vmax if vmax > 0 else 1.0
        if not np.isfinite(c) or c <= vmax:
            # margin lost to rounding at the float range boundaries
            c = float(np.nextafter(vmax, np.inf))
    n = v.shape[0]
    ratio = v / c
    amps = np.concatenate([ratio, np.sqrt(1.0 - ratio**2)]) / np.sqrt(n)
    return AmplitudeEncoding(amps, c)


def build_joint_input(y, k_star, xi: float,
                      c_y: float | None = None,
                      c_k: float | None = None) -> BranchedHybridState:
    """(|y>|0> + |k*>|1>)/sqrt(2) on (data, flag), tensored with the
    squeezed resource pair."""
    enc_y = encode_vector(y, c_y)
    enc_k = encode_vector(k_star, c_k)
    if enc_y.n != enc_k.n:
        raise InputError("y and k_star must have the same length")
    pair = make_squeezed_pair(xi)
    two_n = 2 * enc_y.n
    vec = np.zeros((two_n, 2), dtype=complex)
    vec[:, 0] = enc_y.amplitudes / np.sqrt(2.0)
    vec[:, 1] = enc_k.amplitudes / np.sqrt(2.0)
    layout = RegisterLayout(Register("data", two_n), Register("flag", 2))
    return BranchedHybridState.from_vector(layout, pair.xi, vec.reshape(-1))


# ---------------------------------------------------------------------------
# Schedules and parameter selection


@dataclass(frozen=True)
class TrotterSchedule:
    """Step count M, coupling gamma, and quantization scale zeta.

    The per-query fraction delta = 2 gamma zeta / (pi M) is always derived,
    never stored.  The epsilon appearing in that formula in the source
    protocol is read as the quantization scale zeta (the error budget is a
    separate quantity here).
    """

    m_steps: int
    gamma: float
    zeta: float

    def __post_init__(self):
        if self.m_steps < 1:
            raise InputError("M must be at least 1")
        if not self.zeta > 0:
            raise InputError("zeta must be positive")

    @property
    def delta(self) -> float:
        return 2.0 * self.gamma * self.zeta / (math.pi * self.m_steps)


@dataclass(frozen=True)
class SelectedParameters:
    gamma: float
    m_steps: int
    lambda_min: float
    khat_max_entry: float
    per_step_error_bound: float
    cumulative_error_bound: float


def select_parameters(epsilon_target: float, xi: float,
                      khat: DilatedMatrix) -> SelectedParameters:
    """Pick (gamma, M) from the error budget.

    gamma is xi^2/epsilon scaled so the smallest eigenvalue of Khat is
    retained (gamma lambda_min / 4N = xi^2/epsilon), and
    M = ceil(gamma^2 ||Khat||_max^2 / (epsilon xi^4)).
    """
    if not 0.0 < epsilon_target < 1.0:
        raise InputError("epsilon_target must lie in (0, 1)")
    if not xi > 0:
        raise InputError("xi must be positive")
    lam = np.linalg.eigvalsh(khat.khat)
    lam_min = float(lam.min())
    if lam_min <= 0:
        raise ConditioningError(
            "Khat has a non-positive eigenvalue; apply noise_dilution first")
    four_n = 2 * khat.two_n
    gamma = (xi**2 / epsilon_target) * (four_n / lam_min)
    kmax = khat.max_entry
    m_steps = int(math.ceil(gamma**2 * kmax**2 / (epsilon_target * xi**4)))
    per_step = (gamma / (m_steps * xi**2)) ** 2 * kmax**2
    return SelectedParameters(gamma, m_steps, lam_min, kmax,
                              per_step, m_steps * per_step)


# ---------------------------------------------------------------------------
# Evolutions


def apply_direct_unitary(state: BranchedHybridState, gamma: float,
                         khat: DilatedMatrix, sign: float = 1.0) -> BranchedHybridState:
    """Exact exp(sign * i gamma (Khat/4N) N_hat p_R p~_R), bypassing the oracle."""
    two_n = khat.two_n
    if state.layout.dims[state.layout.axis("data")] != two_n:
        raise InputError("Khat dimension does not match the data register")
    coupled = np.kron(khat.khat / (2.0 * two_n), N_HAT)
    op = DiscreteOperator(coupled, ("data", "flag"))
    return apply_coupled_evolution(state, op, sign * gamma)


@dataclass(frozen=True)
class QueryOutcome:
    probability: float
    attempts: int
    success: bool


def fractional_query(state: BranchedHybridState, oracle: OracleQ, delta: float,
                     rng: np.random.Generator | None = None,
                     max_retries: int = MAX_RETRIES_DEFAULT):
    """One fractional query through the full ancilla protocol.

    Appends an ancilla in |+>, performs the ancilla-controlled reflection
    selected by the state's classical oracle pointer, rotates the ancilla
    (|0> -> |+>, |1> -> |->), applies exp(i (pi delta/2) p_R p~_R N_hat Z_A),
    and projects the ancilla back onto |+>.  The conditioned output equals
    exp(i (pi delta/2) H_j N_hat p_R p~_R) and succeeds with probability
    exactly 1/2.

    With ``rng`` given, acceptance is sampled and a failed projection
    re-attempts the query from the pre-measurement state (a simulator
    rewind) up to ``max_retries``; without it, the conditioned state and
    its probability are returned.  The returned state is renormalized.
    """
    term = oracle.terms[state.oracle_index - 1]
    h_dense = term.to_dense()
    dim = h_dense.shape[0]
    st = state.add_register(Register("ancilla", 2), PLUS,
                            position=len(state.layout.factors))
    controlled = (np.kron(np.eye(dim), np.diag([1.0, 0.0]))
                  + np.kron(h_dense, np.diag([0.0, 1.0])))
    st = apply_discrete_unitary(st, DiscreteOperator(controlled,
                                                     (*oracle.registers, "ancilla")))
    st = apply_discrete_unitary(st, DiscreteOperator(HADAMARD, ("ancilla",)))
    st = apply_coupled_evolution(st, DiscreteOperator(np.kron(N_HAT, PAULI_Z),
                                                      ("flag", "ancilla")),
                                 math.pi * delta / 2.0)
    st, prob = st.project_register("ancilla", PLUS)
    out = st.normalized()
    if rng is None:
        return out, QueryOutcome(prob, 1, True)
    attempts = 1
    while rng.random() >= prob:
        attempts += 1
        if attempts > max_retries:
            raise DegenerateRunError(
                f"ancilla post-selection failed {max_retries} times")
    return out, QueryOutcome(prob, attempts, True)


def walk_visit_indices(start: int, j_max: int) -> list:
    """Oracle pointer values visited by (query . P)^j_max with the cyclic
    shift applied before each query, starting from ``start``."""
    return [((start - 1 + k) % j_max) + 1 for k in range(1, j_max + 1)]


@dataclass(frozen=True)
class WalkOutcome:
    probabilities: tuple
    attempts: int


def permutation_walk(state: BranchedHybridState, decomposition: OneSparseDecomposition,
                     delta: float, rng: np.random.Generator | None = None,
                     registers: tuple = ("swap", "data")):
    """(Q^{delta p p~ N_hat} (P (x) I))^{j_max} with P the cyclic shift.

    The conditioned product equals prod_j exp(i (pi delta/2) H_j N_hat p p~)
    over every reflection once; the pointer returns to its start value.
    """
    oracle = oracle_q(decomposition.terms, registers)
    probs = []
    attempts = 0
    for idx in walk_visit_indices(state.oracle_index, oracle.j_max):
        state = state._replace(oracle_index=idx)
        state, outcome = fractional_query(state, oracle, delta, rng=rng)
        probs.append(outcome.probability)
        attempts += outcome.attempts
    return state, WalkOutcome(tuple(probs), attempts)


# ---------------------------------------------------------------------------
# Readout


def readout_observable(two_n: int) -> DiscreteOperator:
    """(I + Z)/2 on the first data qubit tensor X on the flag qubit.

    (I+Z)/2 of the leading qubit selects the first half of the data
    register, i.e. exactly the signal amplitudes of the encoding.
    """
    p0 = np.zeros((two_n, two_n))
    half = two_n // 2
    p0[:half, :half] = np.eye(half)
    return DiscreteOperator(np.kron(p0, PAULI_X), ("data", "flag"))


def flag_branch_projector(two_n: int, flag_value: int) -> DiscreteOperator:
    proj = np.zeros((2, 2))
    proj[flag_value, flag_value] = 1.0
    return DiscreteOperator(np.kron(np.eye(two_n), proj), ("data", "flag"))


def readout_expectation(state) -> float:
    """Raw <(I+Z)/2 (x) X> on a state or ensemble (no normalization applied)."""
    two_n = state.layout.dims[state.layout.axis("data")]
    return state.expectation(readout_observable(two_n))
