"""Hot propagation kernel for the oracle-path evolution.

One step of the exponential swap maps every component vector V[c, t, :]
on the shear lattice through the step blocks A[k] while shifting the
lattice index by k: out[c, t + k, :] += A[k] @ V[c, t, :].  This is the
inner loop of criterion-scale runs, so it carries a numba @njit kernel
with a pure-numpy fallback; set CVQGPR_BACKEND=numpy to force the
fallback (anything else prefers numba when importable).
"""

from __future__ import annotations

import os

import numpy as np

_FORCED = os.environ.get("CVQGPR_BACKEND", "").strip().lower()

_HAVE_NUMBA = False
if _FORCED != "numpy":
    try:
        from numba import njit, prange
        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _HAVE_NUMBA = False


def backend() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


def propagate_numpy(vecs: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """out[c, t + k, :] += blocks[k] @ vecs[c, t, :] for every c, t, k.

    vecs: (C, T, D) complex; blocks: (K, D, D) complex;
    returns (C, T + K - 1, D).
    """
    c, t, d = vecs.shape
    k = blocks.shape[0]
    # one gemm against all K blocks at once, then K shifted adds
    stacked = blocks.transpose(2, 0, 1).reshape(d, k * d)
    prod = (vecs.reshape(c * t, d) @ stacked).reshape(c, t, k, d)
    out = np.zeros((c, t + k - 1, d), dtype=np.complex128)
    for kk in range(k):
        out[:, kk:kk + t, :] += prod[:, :, kk, :]
    return out


if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _propagate_jit(vecs, blocks, out):  # pragma: no cover - exercised via wrapper
        c, t, d = vecs.shape
        k = blocks.shape[0]
        for ci in prange(c):
            for ti in range(t):
                nonzero = False
                for di in range(d):
                    if vecs[ci, ti, di] != 0:
                        nonzero = True
                        break
                if not nonzero:
                    continue
                for ki in range(k):
                    for do in range(d):
                        acc = 0.0 + 0.0j
                        for di in range(d):
                            acc += blocks[ki, do, di] * vecs[ci, ti, di]
                        out[ci, ti + ki, do] += acc

    def propagate_numba(vecs: np.ndarray, blocks: np.ndarray) -> np.ndarray:
        c, t, d = vecs.shape
        k = blocks.shape[0]
        out = np.zeros((c, t + k - 1, d), dtype=np.complex128)
        _propagate_jit(np.ascontiguousarray(vecs),
                       np.ascontiguousarray(blocks), out)
        return out

    propagate = propagate_numba
else:
    propagate = propagate_numpy
