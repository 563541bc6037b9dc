"""Jitted hot path for the mixture-kernel Gram computations.

These two loops dominate the per-step cost of adaptation (three Gram
matrices plus four gradient accumulations per step), so they carry
``@njit``. Serial on purpose: at training batch sizes the kernels run in
tens of microseconds and thread-pool dispatch would swamp them, and a
fixed accumulation order (plus no ``fastmath``) keeps repeated runs
bit-identical.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def mixture_gram(a, b, bandwidths, weights):
    na, d = a.shape
    nb = b.shape[0]
    m = bandwidths.shape[0]
    neg_inv = np.empty(m, dtype=np.float64)
    for q in range(m):
        neg_inv[q] = -1.0 / (2.0 * bandwidths[q] * bandwidths[q])
    out = np.empty((na, nb), dtype=np.float64)
    for i in range(na):
        for j in range(nb):
            sq = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                sq += diff * diff
            val = 0.0
            for q in range(m):
                val += weights[q] * np.exp(sq * neg_inv[q])
            out[i, j] = val
    return out


@njit(cache=True)
def mixture_gram_gradient(a, b, bandwidths, weights, coeff):
    na, d = a.shape
    nb = b.shape[0]
    m = bandwidths.shape[0]
    neg_inv = np.empty(m, dtype=np.float64)
    w_over_s2 = np.empty(m, dtype=np.float64)
    for q in range(m):
        s2 = bandwidths[q] * bandwidths[q]
        neg_inv[q] = -1.0 / (2.0 * s2)
        w_over_s2[q] = weights[q] / s2
    grad = np.zeros((na, d), dtype=np.float64)
    for i in range(na):
        for j in range(nb):
            sq = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                sq += diff * diff
            scale = 0.0
            for q in range(m):
                scale += w_over_s2[q] * np.exp(sq * neg_inv[q])
            cs = coeff[i, j] * scale
            for k in range(d):
                grad[i, k] += cs * (b[j, k] - a[i, k])
    return grad
