"""Feature-space and label-space kernels.

The feature kernel is a weighted mixture of Gaussians evaluated between
rows of deep-feature batches; the label kernel is the delta kernel on
one-hot labels (1 for matching classes, 0 otherwise). Gram construction
and the analytic Gram gradient dispatch to the selected backend
(:mod:`condalign.backend`).
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ShapeError
from .linalg import as_matrix

__all__ = [
    "DEFAULT_BANDWIDTHS",
    "KernelSpec",
    "LabeledBatch",
    "gaussian_mixture_kernel",
    "gram",
    "label_gram",
    "gram_gradient",
]

# Five-bandwidth mixture used by default throughout training.
DEFAULT_BANDWIDTHS = (0.1, 1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class KernelSpec:
    """Mixture-of-Gaussians kernel plus the label-Gram regularizer.

    Attributes:
        bandwidths: sigma of each Gaussian component, all > 0.
        weights: mixture weights, same length, summing to 1.
        reg_lambda: ridge added to the label Gram before inversion.
    """

    bandwidths: tuple = DEFAULT_BANDWIDTHS
    weights: tuple = field(default=None)  # defaults to uniform
    reg_lambda: float = 1e-3

    def __post_init__(self):
        bws = tuple(float(b) for b in self.bandwidths)
        if not bws:
            raise ValueError("bandwidths must be nonempty")
        if any(b <= 0 for b in bws):
            raise ValueError("bandwidths must all be > 0")
        if self.weights is None:
            ws = tuple(1.0 / len(bws) for _ in bws)
        else:
            ws = tuple(float(w) for w in self.weights)
        if len(ws) != len(bws):
            raise ValueError("weights length must match bandwidths length")
        if any(w <= 0 for w in ws):
            raise ValueError("weights must all be > 0")
        if abs(sum(ws) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(ws)!r}")
        if not self.reg_lambda > 0:
            raise ValueError("reg_lambda must be > 0")
        object.__setattr__(self, "bandwidths", bws)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "reg_lambda", float(self.reg_lambda))

    def arrays(self):
        return (
            np.asarray(self.bandwidths, dtype=np.float64),
            np.asarray(self.weights, dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    """A feature batch z (n x d) paired with one-hot labels y (n x c)."""

    z: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = as_matrix(self.z, "z")
        y = as_matrix(self.y, "y")
        if z.shape[0] != y.shape[0]:
            raise ShapeError(f"z has {z.shape[0]} rows but y has {y.shape[0]}")
        if z.shape[0] < 1:
            raise ShapeError("batch must contain at least one sample")
        if not _is_one_hot(y):
            raise ValueError("y rows must be one-hot (single 1, rest 0)")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)

    @property
    def size(self) -> int:
        return self.z.shape[0]


def _is_one_hot(y: np.ndarray) -> bool:
    if y.shape[1] < 1:
        return False
    ones = y == 1.0
    return bool(np.all((ones.sum(axis=1) == 1) & np.all((y == 0.0) | ones, axis=1)))


def gaussian_mixture_kernel(x, y, spec: KernelSpec) -> float:
    """Scalar mixture kernel sum_m w_m exp(-||x-y||^2 / (2 s_m^2))."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"vector dims differ: {x.shape} vs {y.shape}")
    sq = float(np.sum((x - y) ** 2))
    bws, ws = spec.arrays()
    return float(np.sum(ws * np.exp(sq / (-2.0 * bws * bws))))


def gram(a: np.ndarray, b: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gram matrix G_ij = k(a_i, b_j) under the mixture kernel.

    When called with the same array for both sides the diagonal is pinned
    to exactly 1 (k(x, x) = 1 analytically; this removes round-off from
    the weight normalization).
    """
    a2 = as_matrix(a, "a")
    b2 = a2 if b is a else as_matrix(b, "b")
    if a2.shape[1] != b2.shape[1]:
        raise ShapeError(f"feature dims differ: {a2.shape} vs {b2.shape}")
    bws, ws = spec.arrays()
    out = backend.mixture_gram(a2, b2, bws, ws)
    if b is a:
        np.fill_diagonal(out, 1.0)
    return out


def label_gram(ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
    """Delta kernel on one-hot labels: entry (i, j) = 1 iff same class."""
    ya = as_matrix(ya, "ya")
    yb = as_matrix(yb, "yb")
    if ya.shape[1] != yb.shape[1]:
        raise ShapeError(f"class counts differ: {ya.shape[1]} vs {yb.shape[1]}")
    return ya @ yb.T


def gram_gradient(a, b, spec: KernelSpec, coeff: np.ndarray) -> np.ndarray:
    """Gradient of sum_ij coeff_ij * k(a_i, b_j) with respect to rows of a.

    Returns an a-shaped matrix. Only the first argument is differentiated;
    for the gradient with respect to b call with (b, a, spec, coeff.T).
    """
    a2 = as_matrix(a, "a")
    b2 = a2 if b is a else as_matrix(b, "b")
    if a2.shape[1] != b2.shape[1]:
        raise ShapeError(f"feature dims differ: {a2.shape} vs {b2.shape}")
    coeff = as_matrix(coeff, "coeff")
    if coeff.shape != (a2.shape[0], b2.shape[0]):
        raise ShapeError(
            f"coeff shape {coeff.shape} != gram shape {(a2.shape[0], b2.shape[0])}"
        )
    bws, ws = spec.arrays()
    return backend.mixture_gram_gradient(a2, b2, bws, ws, coeff)
