import os
import subprocess
import sys

import numpy as np
import pytest

from cvqgpr import _kernels


def _random_workload(rng, c=7, t=33, d=6, k=5):
    vecs = rng.standard_normal((c, t, d)) + 1j * rng.standard_normal((c, t, d))
    blocks = rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d))
    return vecs, blocks


class TestPropagate:
    def test_numpy_matches_bruteforce(self, rng):
        vecs, blocks = _random_workload(rng)
        got = _kernels.propagate_numpy(vecs, blocks)
        c, t, d = vecs.shape
        k = blocks.shape[0]
        expected = np.zeros((c, t + k - 1, d), complex)
        for ci in range(c):
            for ti in range(t):
                for ki in range(k):
                    expected[ci, ti + ki] += blocks[ki] @ vecs[ci, ti]
        np.testing.assert_allclose(got, expected, atol=1e-12)

    @pytest.mark.skipif(_kernels.backend() != "numba",
                        reason="numba backend unavailable")
    def test_numba_matches_numpy(self, rng):
        vecs, blocks = _random_workload(rng, c=11, t=50, d=8, k=9)
        np.testing.assert_allclose(_kernels.propagate_numba(vecs, blocks),
                                   _kernels.propagate_numpy(vecs, blocks),
                                   atol=1e-12)

    def test_default_backend_is_numba_here(self):
        assert _kernels.backend() == "numba"

    def test_env_flag_forces_numpy(self):
        code = ("import cvqgpr._kernels as k; "
                "assert k.backend() == 'numpy'; "
                "assert k.propagate is k.propagate_numpy; print('ok')")
        env = dict(os.environ, CVQGPR_BACKEND="numpy")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        assert out.returncode == 0 and "ok" in out.stdout

    def test_backends_agree_through_the_pipeline(self):
        script = (
            "import numpy as np\n"
            "from cvqgpr.gpr import TrainingSet, KernelSpec, NoiseModel\n"
            "from cvqgpr.pipeline import RunConfig, run_mean_estimation\n"
            "data = TrainingSet([[0.0], [1.0]], [0.7, -0.4])\n"
            "cfg = RunConfig(xi=1.0, gamma=1.0, m_steps=6, zeta=0.25, path='oracle')\n"
            "rep = run_mean_estimation(data, KernelSpec('constant', amplitude=0.5),\n"
            "                          NoiseModel(0.5), [0.3], cfg)\n"
            "print(repr(rep.mean_estimate), repr(rep.trotter_trace_distance))\n")
        results = {}
        for backend in ("numba", "numpy"):
            env = dict(os.environ, CVQGPR_BACKEND=backend)
            out = subprocess.run([sys.executable, "-c", script], env=env,
                                 capture_output=True, text=True)
            assert out.returncode == 0, out.stderr
            results[backend] = out.stdout.strip().splitlines()[-1]
        mean_a, td_a = map(float, results["numba"].split())
        mean_b, td_b = map(float, results["numpy"].split())
        assert mean_a == pytest.approx(mean_b, rel=1e-12)
        assert td_a == pytest.approx(td_b, rel=1e-9)


class TestBench:
    def test_bench_module_runs(self):
        out = subprocess.run([sys.executable, "-m", "cvqgpr.bench",
                              "--components", "8", "--sites", "32",
                              "--repeat", "1"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        assert "numpy" in out.stdout
