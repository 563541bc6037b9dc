"""Mutual-information regularizers over predicted class probabilities.

The basic loss is mean per-sample entropy minus the entropy of the mean
prediction (conditional entropy minus marginal entropy, in nats).
Minimizing it sharpens individual predictions while keeping the predicted
class marginal spread out. The partial-label-space variant caps the
marginal-entropy reward at a threshold so the model is never pushed to
populate classes absent from the target domain.
"""

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "entropy",
    "mi_loss",
    "partial_mi_loss",
    "conditional_entropy_loss",
    "validate_probs",
]

# Probabilities are floored inside logarithms so softmax underflow cannot
# produce -inf; gradients use the same floored value.
LOG_FLOOR = 1e-12

_SUM_TOL = 1e-9


def validate_probs(probs: np.ndarray) -> np.ndarray:
    """Check an (n x c) batch of row-stochastic probabilities."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
        raise ShapeError(f"probs must be a nonempty 2-D batch, got {probs.shape}")
    if np.any(probs < 0.0):
        raise DomainError("probabilities must be nonnegative")
    sums = probs.sum(axis=1)
    bad = np.abs(sums - 1.0) > _SUM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DomainError(f"row {i} sums to {sums[i]!r}, not 1")
    return probs


def _safe_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, LOG_FLOOR))


def entropy(p) -> float:
    """Shannon entropy -sum p ln p of one distribution, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size < 1:
        raise ShapeError("empty probability vector")
    if np.any(p < 0.0):
        raise DomainError("probabilities must be nonnegative")
    s = float(p.sum())
    if abs(s - 1.0) > _SUM_TOL:
        raise DomainError(f"probabilities sum to {s!r}, not 1")
    return float(-np.sum(p * _safe_log(p)))


def mi_loss(probs: np.ndarray):
    """Mutual-information loss and its gradient w.r.t. the probabilities.

    value = (1/n) sum_i H(p_i) - H(mean_i p_i)
    grad  = [(-ln p_ij - 1) + (ln pbar_j + 1)] / n

    Returns:
        (value, grad) with grad shaped like probs.
    """
    probs = validate_probs(probs)
    n = probs.shape[0]
    log_p = _safe_log(probs)
    cond = float(-np.sum(probs * log_p) / n)
    pbar = probs.mean(axis=0)
    log_pbar = _safe_log(pbar)
    marg = float(-np.sum(pbar * log_pbar))
    grad = ((-log_p - 1.0) + (log_pbar + 1.0)[None, :]) / n
    return cond - marg, grad


def partial_mi_loss(probs: np.ndarray, gamma1: float):
    """Mutual-information loss with the marginal-entropy reward capped.

    Below the cap this is identical to :func:`mi_loss`. Once the marginal
    entropy reaches ``gamma1`` the marginal term (value and gradient) is
    replaced by the constant cap, so nothing pushes the class marginal to
    spread further. The boundary itself takes the capped branch.
    """
    if not gamma1 > 0:
        raise DomainError("gamma1 must be > 0")
    probs = validate_probs(probs)
    n = probs.shape[0]
    log_p = _safe_log(probs)
    cond = float(-np.sum(probs * log_p) / n)
    pbar = probs.mean(axis=0)
    marg = float(-np.sum(pbar * _safe_log(pbar)))
    if marg < gamma1:
        grad = ((-log_p - 1.0) + (_safe_log(pbar) + 1.0)[None, :]) / n
        return cond - marg, grad
    grad = (-log_p - 1.0) / n
    return cond - gamma1, grad


def conditional_entropy_loss(probs: np.ndarray):
    """Mean per-sample entropy alone (the marginal-term ablation)."""
    probs = validate_probs(probs)
    n = probs.shape[0]
    log_p = _safe_log(probs)
    cond = float(-np.sum(probs * log_p) / n)
    return cond, (-log_p - 1.0) / n
