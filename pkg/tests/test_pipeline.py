import numpy as np
import pytest

from cvqgpr.errors import ConditioningError, DegenerateRunError, InputError
from cvqgpr.gpr import KernelSpec, NoiseModel, TrainingSet
from cvqgpr.pipeline import (C_WINDOW, RunConfig, run_mean_estimation,
                             run_variance_estimation)

SE = KernelSpec("squared-exponential", 1.0, 1.0)


def _data(n=2, seed=0, d=1):
    rng = np.random.default_rng(seed)
    return TrainingSet(rng.uniform(-1, 1, (n, d)), rng.normal(0, 1, n))


class TestMeanEstimation:
    def test_n1_direct_exact(self):
        data = TrainingSet([[0.0]], [1.2])
        cfg = RunConfig(xi=0.05, epsilon_target=0.05)
        rep = run_mean_estimation(data, SE, NoiseModel(0.1), [0.0], cfg)
        assert rep.rel_error < 0.05
        assert rep.classical_mean == pytest.approx(1.2 / 1.1, rel=1e-12)

    def test_zero_targets_give_zero_mean(self):
        data = TrainingSet([[0.0], [1.0]], [0.0, 0.0])
        cfg = RunConfig(xi=0.1, epsilon_target=0.1)
        rep = run_mean_estimation(data, SE, NoiseModel(0.1), [0.5], cfg)
        assert abs(rep.mean_estimate) < 1e-6
        assert rep.classical_mean == 0.0

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_direct_exact_accuracy(self, n):
        data = _data(n, seed=n)
        cfg = RunConfig(xi=0.1, epsilon_target=0.05)
        rep = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3], cfg)
        assert rep.rel_error < 0.05

    def test_error_decreases_with_budget(self):
        data = _data(2, seed=1)
        rels = []
        for eps in (0.2, 0.1, 0.05):
            cfg = RunConfig(xi=0.1, epsilon_target=eps)
            rep = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3], cfg)
            rels.append(rep.rel_error)
        assert rels[2] < rels[1] < rels[0]

    def test_sign_flag_gives_same_estimate(self):
        data = _data(2, seed=2)
        rep_p = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3],
                                    RunConfig(xi=0.1, epsilon_target=0.1, sign=1.0))
        rep_m = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3],
                                    RunConfig(xi=0.1, epsilon_target=0.1, sign=-1.0))
        assert rep_p.mean_estimate == pytest.approx(rep_m.mean_estimate, rel=1e-10)

    def test_window_probability_at_gamma_zero(self):
        from scipy.special import erf
        data = _data(2, seed=3)
        cfg = RunConfig(xi=0.1, gamma=0.0, m_steps=1)
        rep = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3], cfg)
        assert rep.window_probability == pytest.approx(erf(1.0) ** 2, abs=1e-9)

    def test_conditioning_error_propagates(self):
        data = TrainingSet([[0.0], [0.0]], [1.0, 1.0])  # duplicated point
        cfg = RunConfig(xi=0.1, epsilon_target=0.1)
        with pytest.raises(ConditioningError):
            run_mean_estimation(data, SE, NoiseModel(0.0), [0.5], cfg)

    def test_padding_non_power_of_two(self):
        data = _data(3, seed=4)
        cfg = RunConfig(xi=0.1, epsilon_target=0.05)
        rep = run_mean_estimation(data, SE, NoiseModel(0.3), [0.2], cfg)
        assert rep.params["nPadded"] == 4
        assert rep.rel_error < 0.05


class TestVarianceEstimation:
    def test_training_point_interpolation(self):
        data = TrainingSet([[0.0], [0.8]], [1.0, -0.5])
        cfg = RunConfig(xi=0.05, epsilon_target=0.05)
        rep = run_variance_estimation(data, SE, NoiseModel(0.0), [0.8], cfg)
        assert rep.classical_variance == pytest.approx(0.0, abs=1e-10)
        assert abs(rep.variance_estimate) < 0.05 * rep.params["cKstar"]

    def test_zero_k_star_returns_k_star_star(self):
        data = TrainingSet([[1.0], [2.0]], [0.3, 0.4])
        cfg = RunConfig(xi=0.1, epsilon_target=0.1)
        rep = run_variance_estimation(data, KernelSpec("linear"), NoiseModel(0.5),
                                      [0.0], cfg)
        # linear kernel at x* = 0: k* = 0 and k** = 0
        assert rep.variance_estimate == pytest.approx(0.0, abs=1e-14)

    def test_matches_classical_variance(self):
        data = _data(2, seed=5)
        cfg = RunConfig(xi=0.1, epsilon_target=0.05)
        rep = run_variance_estimation(data, SE, NoiseModel(0.3), [0.1], cfg)
        k_star_star = 1.0  # SE kernel amplitude at zero distance
        assert abs(rep.variance_estimate - rep.classical_variance) \
            < 0.05 * k_star_star


class TestSampledMode:
    def test_deterministic_with_seed(self):
        data = _data(2, seed=6)
        cfg = RunConfig(xi=0.1, epsilon_target=0.1, mode="sampled",
                        shots=5000, seed=11)
        a = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3], cfg)
        b = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3], cfg)
        assert a.to_dict() == b.to_dict()
        assert a.stderr is not None and a.stderr > 0

    def test_estimates_concentrate_with_shots(self):
        data = _data(2, seed=7)
        base = dict(xi=0.1, epsilon_target=0.1, mode="sampled")
        exact = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3],
                                    RunConfig(xi=0.1, epsilon_target=0.1))
        errs = {}
        for shots in (10**3, 10**5):
            devs = []
            for seed in range(30):
                cfg = RunConfig(shots=shots, seed=seed, **base)
                rep = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3], cfg)
                devs.append(rep.mean_estimate - exact.mean_estimate)
            errs[shots] = np.std(devs)
        assert errs[10**5] < 0.3 * errs[10**3]


class TestOraclePath:
    def test_report_carries_trotter_diagnostics(self):
        data = TrainingSet([[0.0], [1.0]], [0.7, -0.4])
        cfg = RunConfig(xi=1.0, gamma=1.0, m_steps=8, zeta=0.25, path="oracle")
        rep = run_mean_estimation(data, KernelSpec("constant", amplitude=0.5),
                                  NoiseModel(0.5), [0.3], cfg)
        assert rep.trotter_trace_distance is not None
        assert 0.0 < rep.trotter_trace_distance < 0.1
        assert rep.ancilla_probability == 0.5
        assert rep.ancilla_trials == 8 * 4  # M * j_max conditioned queries
        assert rep.truncated_weight < 1e-3

    def test_oracle_approaches_direct_estimate(self):
        data = TrainingSet([[0.0], [1.0]], [0.7, -0.4])
        kern = KernelSpec("constant", amplitude=0.5)
        direct = run_mean_estimation(data, kern, NoiseModel(0.5), [0.3],
                                     RunConfig(xi=0.1, gamma=12.0, m_steps=1))
        oracle = run_mean_estimation(
            data, kern, NoiseModel(0.5), [0.3],
            RunConfig(xi=0.1, gamma=12.0, m_steps=96, zeta=0.25, path="oracle",
                      jump_depth=1))
        assert oracle.mean_estimate == pytest.approx(direct.mean_estimate,
                                                     rel=0.08)


class TestReportSchema:
    def test_fixed_key_set(self):
        data = _data(2, seed=8)
        rep = run_mean_estimation(data, SE, NoiseModel(0.3), [0.3],
                                  RunConfig(xi=0.1, epsilon_target=0.1))
        doc = rep.to_dict()
        assert set(doc) == {"version", "seed", "params", "classical", "quantum",
                            "probabilities", "errors"}
        assert set(doc["classical"]) == {"mean", "variance", "kappa"}
        assert set(doc["quantum"]) == {"mean", "variance", "relError", "stderr"}
        assert set(doc["probabilities"]) == {"window", "ancilla",
                                             "ancillaSuccesses", "ancillaTrials"}
        assert set(doc["errors"]) == {"trotterTraceDistance", "approxBias",
                                      "truncatedWeight"}

    def test_config_validation(self):
        with pytest.raises(InputError):
            RunConfig(xi=-1.0)
        with pytest.raises(InputError):
            RunConfig(path="sideways")
        with pytest.raises(InputError):
            RunConfig(gamma=1.0)  # missing m_steps
        with pytest.raises(InputError):
            RunConfig(epsilon_target=2.0)
