import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqgpr.algorithm import (HADAMARD, N_HAT, TrotterSchedule,
                              apply_direct_unitary, build_joint_input,
                              encode_vector, flag_branch_projector,
                              fractional_query, permutation_walk,
                              readout_expectation, readout_observable,
                              select_parameters, walk_visit_indices)
from cvqgpr.dilation import (OneSparseReflection, build_decomposition,
                             decompose_one_sparse, embed_khat, oracle_q)
from cvqgpr.errors import ConditioningError, EncodingError, InputError
from cvqgpr.hybrid import (BranchedHybridState, DiscreteOperator, Register,
                           RegisterLayout, apply_coupled_evolution,
                           shear_overlap, shear_overlap_matrix)

from test_dilation import random_one_sparse_even


class TestEncodeVector:
    def test_single_component(self):
        enc = encode_vector([1.0], c_override=2.0)
        npt.assert_allclose(enc.amplitudes, [0.5, math.sqrt(3.0) / 2.0])
        assert np.linalg.norm(enc.amplitudes) == pytest.approx(1.0, abs=1e-15)

    def test_zero_vector(self):
        enc = encode_vector([0.0, 0.0, 0.0])
        npt.assert_allclose(enc.amplitudes[:3], 0.0)
        npt.assert_allclose(enc.amplitudes[3:], 1.0 / math.sqrt(3.0))

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=8))
    @settings(max_examples=80, deadline=None)
    def test_unit_norm(self, v):
        enc = encode_vector(v)
        assert np.linalg.norm(enc.amplitudes) == pytest.approx(1.0, abs=1e-12)
        assert enc.scale > np.max(np.abs(v)) or np.max(np.abs(v)) == 0

    def test_inner_product_structure(self, rng):
        v = rng.normal(size=4)
        w = rng.normal(size=4)
        ev, ew = encode_vector(v), encode_vector(w)
        got = float(ev.amplitudes @ ew.amplitudes)
        cross = np.sqrt((1 - v**2 / ev.scale**2) * (1 - w**2 / ew.scale**2))
        expected = (v @ w / (ev.scale * ew.scale) + cross.sum()) / 4.0
        assert got == pytest.approx(expected, rel=1e-12)

    def test_scale_must_exceed_max(self):
        with pytest.raises(EncodingError):
            encode_vector([1.0, -2.0], c_override=2.0)


class TestBuildJointInput:
    def test_equal_vectors_leave_flag_unentangled(self):
        y = np.array([0.4, -0.7])
        state = build_joint_input(y, y, xi=0.2)
        rho = state.reduced_density_matrix("flag")
        npt.assert_allclose(rho, np.full((2, 2), 0.5), atol=1e-12)

    def test_orthogonal_encodings_maximally_entangle_flag(self):
        # +v and -v encode to orthogonal states when the junk parts cancel:
        # instead use vectors with orthogonal encodings built by hand
        layoutless = encode_vector([1.0, 0.0], c_override=math.sqrt(2.0))
        # simpler: verify via the actual reduced state of a generic pair
        y = np.array([0.9, 0.1])
        k = np.array([-0.9, -0.1])
        state = build_joint_input(y, k, xi=0.2)
        rho = state.reduced_density_matrix("flag")
        overlap = float(encode_vector(y).amplitudes @ encode_vector(k).amplitudes)
        npt.assert_allclose(rho, [[0.5, overlap / 2.0], [overlap / 2.0, 0.5]],
                            atol=1e-12)

    def test_n2_amplitudes_match_hand_assembly(self):
        y = np.array([0.7, -0.4])
        k = np.array([0.6, 0.5])
        state = build_joint_input(y, k, xi=0.3)
        ey, ek = encode_vector(y), encode_vector(k)
        expected = (np.kron(ey.amplitudes, [1.0, 0.0])
                    + np.kron(ek.amplitudes, [0.0, 1.0])) / math.sqrt(2.0)
        npt.assert_allclose(state.vectors[0], expected, atol=1e-15)
        assert state.norm_squared() == pytest.approx(1.0, abs=1e-12)


class TestSelectParameters:
    def test_worked_example(self):
        sel = select_parameters(0.1, 0.1, embed_khat(np.array([[1.0]])))
        assert sel.gamma == pytest.approx(0.4, rel=1e-12)
        assert sel.m_steps == math.ceil(sel.gamma**2 / (0.1 * 0.1**4))
        assert sel.m_steps == pytest.approx(16000, rel=1e-3)

    def test_halving_epsilon_scales_m_by_eight(self):
        khat = embed_khat(np.array([[1.0, 0.2], [0.2, 1.5]]))
        a = select_parameters(0.2, 0.1, khat)
        b = select_parameters(0.1, 0.1, khat)
        assert b.gamma == pytest.approx(2.0 * a.gamma, rel=1e-12)
        assert b.m_steps == pytest.approx(8.0 * a.m_steps, rel=1e-2)

    def test_doubling_xi_keeps_m(self):
        khat = embed_khat(np.array([[1.0, 0.2], [0.2, 1.5]]))
        a = select_parameters(0.1, 0.1, khat)
        b = select_parameters(0.1, 0.2, khat)
        assert b.gamma == pytest.approx(4.0 * a.gamma, rel=1e-12)
        assert b.m_steps == pytest.approx(a.m_steps, rel=1e-2)

    def test_singular_khat_raises(self):
        with pytest.raises(ConditioningError):
            select_parameters(0.1, 0.1, embed_khat(np.array([[0.0]])))


class TestTrotterSchedule:
    def test_delta_formula(self):
        s = TrotterSchedule(10, 2.0, 0.3)
        assert s.delta == pytest.approx(2.0 * 2.0 * 0.3 / (math.pi * 10))

    def test_requires_positive_m(self):
        with pytest.raises(InputError):
            TrotterSchedule(0, 1.0, 0.3)


class TestApplyDirectUnitary:
    def test_gamma_zero_identity(self):
        state = build_joint_input([0.5], [0.3], xi=0.2)
        out = apply_direct_unitary(state, 0.0, embed_khat(np.array([[1.0]])))
        assert out is state

    def test_flag_zero_branch_untouched(self):
        y, k = np.array([0.5]), np.array([0.3])
        state = build_joint_input(y, k, xi=0.2)
        out = apply_direct_unitary(state, 3.0, embed_khat(np.array([[1.2]])))
        # the flag-0 component must stay entirely on the unsheared branch
        acc = np.zeros(2, dtype=complex)
        for shear, vec in zip(out.shears, out.vectors):
            part = vec.reshape(2, 2)
            if np.any(np.abs(part[:, 0]) > 1e-14):
                assert shear == 0.0
            acc += part[:, 0]
        npt.assert_allclose(acc, state.vectors[0].reshape(2, 2)[:, 0], atol=1e-14)

    def test_diagonal_khat_shears_per_basis_state(self):
        k = np.diag([2.0, 0.5])
        khat = embed_khat(k)
        y = np.array([0.5, 0.2])
        state = build_joint_input(y, y, xi=0.2)
        gamma = 1.6
        out = apply_direct_unitary(state, gamma, khat)
        four_n = 2 * khat.two_n
        expected_shears = {0.0}
        expected_shears.update(gamma * lam / four_n
                               for lam in np.diag(khat.khat))
        got = {round(s, 12) for s in out.shears}
        assert got == {round(s, 12) for s in expected_shears}


def _branch_map(state: BranchedHybridState) -> dict:
    return {round(s, 10): v for s, v in zip(state.shears, state.vectors)}


def _state_distance(a: BranchedHybridState, b: BranchedHybridState) -> float:
    """L2 distance via closed-form Gaussian overlaps."""
    cross = np.einsum("ad,ab,bd->", a.vectors.conj(),
                      shear_overlap_matrix(a.xi, a.shears, b.shears), b.vectors)
    return math.sqrt(max(a.norm_squared() + b.norm_squared() - 2 * cross.real, 0.0))


class TestFractionalQuery:
    def _make(self, xi=0.3):
        # pair register of dim 2 carrying the reflection, plus the flag
        refl = OneSparseReflection(np.array([1, 0]), np.array([1, 1], dtype=np.int8))
        q = oracle_q([refl], registers=("pair",))
        layout = RegisterLayout(Register("pair", 2), Register("flag", 2))
        vec = np.array([0.6, 0.2, 0.5, math.sqrt(1 - 0.65)], dtype=complex)
        state = BranchedHybridState.from_vector(layout, xi, vec / np.linalg.norm(vec))
        return state, q

    def test_delta_zero_is_identity_with_half_probability(self):
        state, q = self._make()
        out, outcome = fractional_query(state, q, 0.0)
        assert abs(outcome.probability - 0.5) <= 1e-9
        assert _state_distance(out, state) < 1e-12

    def test_identity_oracle_collapses_to_coupled_evolution(self):
        refl = OneSparseReflection(np.arange(2), np.ones(2, dtype=np.int8))
        q = oracle_q([refl], registers=("pair",))
        layout = RegisterLayout(Register("pair", 2), Register("flag", 2))
        vec = np.array([0.5, 0.5, 0.5, 0.5], dtype=complex)
        state = BranchedHybridState.from_vector(layout, 0.3, vec)
        delta = 0.4
        out, outcome = fractional_query(state, q, delta)
        expected = apply_coupled_evolution(
            state, DiscreteOperator(N_HAT, ("flag",)), math.pi * delta / 2.0)
        assert outcome.probability == pytest.approx(0.5, abs=1e-12)
        assert _state_distance(out, expected) < 1e-12

    def test_matches_dense_eigendecomposition(self):
        # conditioned output exp(i (pi delta/2) H N p p~) built independently
        state, q = self._make()
        delta = 0.37
        out, _ = fractional_query(state, q, delta)
        h = q.terms[0].to_dense()
        w, u = np.linalg.eigh(h)
        beta = math.pi * delta / 2.0
        shears, vecs = [], []
        vt = state.vectors[0].reshape(2, 2)
        for target, lam_sign in ((0, 0.0), (1, 1.0), (1, -1.0)):
            if target == 0:
                sel = vt[:, 0]
                full = np.stack([sel, np.zeros(2)], axis=1)
                shears.append(0.0)
                vecs.append(full.reshape(-1))
            else:
                proj = u[:, w * lam_sign > 0.5] if lam_sign > 0 else u[:, w < -0.5]
                p = proj @ proj.conj().T
                sel = p @ vt[:, 1]
                full = np.stack([np.zeros(2), sel], axis=1)
                shears.append(lam_sign * beta)
                vecs.append(full.reshape(-1))
        expected = BranchedHybridState(state.layout, state.xi, shears,
                                       np.asarray(vecs))
        assert _state_distance(out, expected) < 1e-8

    def test_sampled_mode_counts_attempts(self):
        state, q = self._make()
        rng = np.random.default_rng(3)
        out, outcome = fractional_query(state, q, 0.2, rng=rng)
        assert outcome.success and outcome.attempts >= 1
        out2, outcome2 = fractional_query(state, q, 0.2,
                                          rng=np.random.default_rng(3))
        assert outcome2.attempts == outcome.attempts
        assert _state_distance(out, out2) < 1e-14


class TestPermutationWalk:
    def test_visit_indices_cover_all_terms(self):
        assert sorted(walk_visit_indices(1, 4)) == [1, 2, 3, 4]
        assert walk_visit_indices(1, 4) == [2, 3, 4, 1]

    def test_single_term_equals_single_query(self):
        refl = OneSparseReflection(np.array([1, 0]), np.array([1, 1], dtype=np.int8))
        from cvqgpr.dilation import OneSparseDecomposition, OneSparseMatrix
        htilde = OneSparseMatrix(np.array([1, 0]), np.array([2, 2], dtype=np.int64))
        dec = OneSparseDecomposition(0.5, htilde, [refl])
        layout = RegisterLayout(Register("pair", 2), Register("flag", 2))
        vec = np.array([0.6, 0.2, 0.5, math.sqrt(1 - 0.65)], dtype=complex)
        state = BranchedHybridState.from_vector(layout, 0.3,
                                                vec / np.linalg.norm(vec))
        walked, info = permutation_walk(state, dec, 0.3, registers=("pair",))
        q = oracle_q([refl], registers=("pair",))
        queried, _ = fractional_query(state, q, 0.3)
        assert _state_distance(walked, queried) < 1e-12
        assert info.probabilities[0] == pytest.approx(0.5, abs=1e-12)

    def test_commuting_identity_terms_collapse(self):
        refl = OneSparseReflection(np.arange(2), np.ones(2, dtype=np.int8))
        from cvqgpr.dilation import OneSparseDecomposition, OneSparseMatrix
        htilde = OneSparseMatrix(np.arange(2), np.array([4, 4], dtype=np.int64))
        dec = OneSparseDecomposition(0.5, htilde, [refl, refl])
        layout = RegisterLayout(Register("pair", 2), Register("flag", 2))
        state = BranchedHybridState.from_vector(layout, 0.3,
                                                np.full(4, 0.5, dtype=complex))
        delta = 0.25
        walked, _ = permutation_walk(state, dec, delta, registers=("pair",))
        expected = apply_coupled_evolution(
            state, DiscreteOperator(N_HAT, ("flag",)), 2.0 * math.pi * delta / 2.0)
        assert _state_distance(walked, expected) < 1e-12

    def test_matches_dense_product_oracle(self):
        gen = np.random.default_rng(42)
        htilde = random_one_sparse_even(gen, 8)
        if not np.any(htilde.vals):
            pytest.skip("degenerate draw")
        terms = decompose_one_sparse(htilde)
        from cvqgpr.dilation import OneSparseDecomposition
        dec = OneSparseDecomposition(0.5, htilde, terms)
        layout = RegisterLayout(Register("pair", 8), Register("flag", 2))
        raw = gen.normal(size=16) + 1j * gen.normal(size=16)
        raw /= np.linalg.norm(raw)
        state = BranchedHybridState.from_vector(layout, 0.4, raw)
        delta = 0.21
        walked, _ = permutation_walk(state, dec, delta, registers=("pair",))

        # independent branch algebra: apply each exp(i beta H_j (x) N p p~)
        # by dense eigendecomposition, in the same visit order
        beta = math.pi * delta / 2.0
        branches = {0.0: state.vectors[0].reshape(8, 2).copy()}
        for idx in walk_visit_indices(1, len(terms)):
            h = terms[idx - 1].to_dense()
            plus = (np.eye(8) + h) / 2.0
            minus = (np.eye(8) - h) / 2.0
            new = {}
            for theta, mat in branches.items():
                for dth, proj in ((0.0, None), (beta, plus), (-beta, minus)):
                    out = np.zeros_like(mat)
                    if proj is None:
                        out[:, 0] = mat[:, 0]
                    else:
                        out[:, 1] = proj @ mat[:, 1]
                    key = round(theta + dth, 12)
                    if key not in new:
                        new[key] = np.zeros_like(mat)
                    new[key] += out
            branches = {k: v for k, v in new.items() if np.any(v != 0)}
        shears = sorted(branches)
        expected = BranchedHybridState(layout, 0.4, shears,
                                       np.asarray([branches[s].reshape(-1)
                                                   for s in shears]))
        assert _state_distance(walked, expected) < 1e-8


class TestReadout:
    def test_idealized_state_expectation(self, rng):
        n = 2
        k = np.array([[1.0, 0.3], [0.3, 1.2]])
        khat = embed_khat(k)
        y = rng.normal(size=n)
        k_star = rng.normal(size=n) * 0.4
        ey, ek = encode_vector(y), encode_vector(k_star)
        xi, gamma = 0.1, 2.0
        khat_inv = np.linalg.inv(khat.khat)
        vec = (np.kron(ey.amplitudes, [1.0, 0.0])
               + (xi**2 / gamma) * np.kron(khat_inv @ ek.amplitudes, [0.0, 1.0]))
        layout = RegisterLayout(Register("data", 2 * n), Register("flag", 2))
        state = BranchedHybridState.from_vector(layout, xi, vec)
        got = readout_expectation(state)
        expected = (2.0 * xi**2 * float(y @ np.linalg.solve(k, k_star))
                    / (n * ey.scale * ek.scale * gamma))
        assert got == pytest.approx(expected, rel=1e-12)
        # Eq.-style rescale recovers the inner product to 1e-10
        mean = got * n * gamma * ey.scale * ek.scale / (2.0 * xi**2)
        assert mean == pytest.approx(float(y @ np.linalg.solve(k, k_star)),
                                     abs=1e-10)

    def test_zero_k_star_reads_zero(self):
        layout = RegisterLayout(Register("data", 4), Register("flag", 2))
        enc = encode_vector([0.4, 0.1])
        vec = np.kron(enc.amplitudes, [1.0, 0.0])
        state = BranchedHybridState.from_vector(layout, 0.1, vec)
        assert readout_expectation(state) == pytest.approx(0.0, abs=1e-14)

    def test_flag_projector_weights(self):
        state = build_joint_input([0.5], [0.2], xi=0.3)
        w0 = state.expectation(flag_branch_projector(2, 0))
        w1 = state.expectation(flag_branch_projector(2, 1))
        assert w0 == pytest.approx(0.5, abs=1e-12)
        assert w1 == pytest.approx(0.5, abs=1e-12)
