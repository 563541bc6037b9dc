"""Confidence-thresholded pseudo-label selection for target batches."""

import numpy as np

from .mutual_info import validate_probs

__all__ = ["select_pseudo_labels"]


def select_pseudo_labels(probs: np.ndarray, gamma0: float):
    """Pick rows whose top probability strictly exceeds ``gamma0``.

    Each selected row gets a one-hot label at its argmax (ties broken by
    the lowest class index). Low-confidence rows are simply not selected;
    the trainer still feeds them to the mutual-information loss.

    Returns:
        (indices, labels): int64 row indices into ``probs`` and the
        matching (k x c) one-hot label matrix; both empty when nothing
        clears the threshold.
    """
    probs = validate_probs(probs)
    if not 0.0 < gamma0 < 1.0:
        raise ValueError(f"gamma0 must be in (0, 1), got {gamma0!r}")
    conf = probs.max(axis=1)
    indices = np.flatnonzero(conf > gamma0)
    labels = np.zeros((indices.size, probs.shape[1]))
    if indices.size:
        labels[np.arange(indices.size), probs[indices].argmax(axis=1)] = 1.0
    return indices, labels
