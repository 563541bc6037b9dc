"""Pure-numpy reference path for the mixture-kernel Gram computations.

Selected via ``CONDALIGN_BACKEND=numpy``; also the fallback when numba is
not importable. Kept in exact functional agreement with the jitted path
(tests compare the two), differing only in summation order round-off.
"""

import numpy as np


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean distances between rows of a and b."""
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    sq = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    if a is b:
        np.fill_diagonal(sq, 0.0)
    return sq


def mixture_gram(a, b, bandwidths, weights):
    sq = sq_dists(a, b)
    out = np.zeros_like(sq)
    for w, s in zip(weights, bandwidths):
        out += w * np.exp(sq / (-2.0 * s * s))
    return out


def mixture_gram_gradient(a, b, bandwidths, weights, coeff):
    # d/da_i sum_ij coeff_ij k(a_i, b_j) with k the Gaussian mixture:
    # each pair contributes coeff_ij * S_ij * (b_j - a_i), where
    # S_ij = sum_m (w_m / s_m^2) exp(-||a_i - b_j||^2 / (2 s_m^2)).
    sq = sq_dists(a, b)
    scale = np.zeros_like(sq)
    for w, s in zip(weights, bandwidths):
        s2 = s * s
        scale += (w / s2) * np.exp(sq / (-2.0 * s2))
    m = coeff * scale
    return m @ b - m.sum(axis=1)[:, None] * a
