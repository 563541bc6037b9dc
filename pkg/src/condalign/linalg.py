"""Dense float64 matrix helpers used by the kernel estimators.

Matrices are plain 2-D ``numpy.ndarray`` of float64. The three operations
here are thin, contract-enforcing wrappers: shapes are validated up front
and results that must be finite are checked before returning.
"""

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericError, ShapeError, SingularMatrixError

__all__ = ["as_matrix", "matmul", "solve_spd", "trace_product"]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a contiguous 2-D float64 array, rejecting other ranks."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={out.ndim}")
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product a @ b with explicit shape validation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    return a @ b


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ X = b for symmetric positive definite ``a``.

    Uses a Cholesky factorization instead of forming the inverse; callers
    regularize (a + lambda*I) so the factorization is well posed.

    Raises:
        ShapeError: if ``a`` is not square or rows do not match ``b``.
        SingularMatrixError: on non-finite input or factorization breakdown.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"solve_spd: a must be square, got {a.shape}")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"solve_spd: a {a.shape} incompatible with b {b.shape}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise SingularMatrixError("solve_spd: non-finite entries in input")
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
        x = cho_solve(factor, b, check_finite=False)
    except LinAlgError as exc:
        raise SingularMatrixError(f"solve_spd: factorization failed: {exc}") from exc
    if not np.isfinite(x).all():
        raise NumericError("solve_spd: non-finite solution")
    return x


def trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """Tr(a @ b) without materializing the product (sum of a_ij * b_ji)."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0] or a.shape[0] != b.shape[1]:
        raise ShapeError(f"trace_product: {a.shape} x {b.shape} has no square product")
    return float(np.einsum("ij,ji->", a, b))
