"""Benchmark the oracle-step propagation kernel: numba vs pure numpy.

Run as ``python -m cvqgpr.bench [--components C] [--sites T] [--dim D]
[--shifts K] [--repeat R]``.  The workload mirrors a mid-size swap step:
out[c, t+k, :] += A[k] @ V[c, t, :] over a batch of branched components.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import _kernels


def _workload(components: int, sites: int, dim: int, shifts: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((components, sites, dim)) \
        + 1j * rng.standard_normal((components, sites, dim))
    blocks = rng.standard_normal((shifts, dim, dim)) \
        + 1j * rng.standard_normal((shifts, dim, dim))
    return vecs, blocks


def _time(fn, vecs, blocks, repeat: int) -> tuple:
    fn(vecs, blocks)  # warm-up (JIT compilation for the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(vecs, blocks)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--components", type=int, default=256)
    parser.add_argument("--sites", type=int, default=512)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--shifts", type=int, default=9)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    vecs, blocks = _workload(args.components, args.sites, args.dim, args.shifts)
    flops = 8 * args.components * args.sites * args.shifts * args.dim * args.dim
    print(f"workload: C={args.components} T={args.sites} D={args.dim} "
          f"K={args.shifts}  (~{flops / 1e9:.2f} GFLOP per call)")

    t_np, ref = _time(_kernels.propagate_numpy, vecs, blocks, args.repeat)
    print(f"numpy : {t_np * 1e3:9.2f} ms  ({flops / t_np / 1e9:6.2f} GFLOP/s)")

    if _kernels.backend() == "numba":
        t_nb, out = _time(_kernels.propagate_numba, vecs, blocks, args.repeat)
        err = float(np.max(np.abs(out - ref)))
        print(f"numba : {t_nb * 1e3:9.2f} ms  ({flops / t_nb / 1e9:6.2f} GFLOP/s)  "
              f"max|diff| = {err:.2e}")
        print(f"speedup numba/numpy: {t_np / t_nb:.2f}x")
    else:
        print("numba backend unavailable or disabled (CVQGPR_BACKEND=numpy)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
