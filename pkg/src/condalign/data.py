"""Synthetic domain-shift generators, CSV ingestion, and batch sampling.

The synthetic task places Gaussian class clusters on a circle in 2-D; the
target domain sees the same clusters rotated and translated, a controlled
covariate shift with unchanged label semantics. Real tabular data comes
in through a single CSV format (feature columns, final integer ``label``
column, -1 for unlabeled).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "DomainDataset",
    "make_shifted_clusters",
    "make_partial_target",
    "load_csv",
    "save_csv",
    "batch_sampler",
]


@dataclass(frozen=True, eq=False)
class DomainDataset:
    x: np.ndarray  # (N, dim) float64
    labels: np.ndarray  # (N,) int64, -1 = unlabeled
    class_count: int
    name: str = ""

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DataError(f"x must be a nonempty 2-D array, got shape {x.shape}")
        if labels.shape != (x.shape[0],):
            raise DataError(f"labels shape {labels.shape} != ({x.shape[0]},)")
        if self.class_count < 1:
            raise DataError("class_count must be >= 1")
        if labels.min() < -1 or labels.max() >= self.class_count:
            raise DataError("labels must lie in {-1, 0, ..., class_count-1}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def one_hot(self) -> np.ndarray:
        """One-hot labels; rows must all be labeled."""
        if np.any(self.labels < 0):
            raise DataError(f"dataset {self.name!r} contains unlabeled rows")
        out = np.zeros((self.size, self.class_count))
        out[np.arange(self.size), self.labels] = 1.0
        return out


def make_shifted_clusters(
    classes: int,
    per_class: int,
    shift,
    rotation: float,
    noise: float,
    seed: int,
    radius: float = 2.0,
):
    """Source/target pair of Gaussian clusters on a circle.

    Source cluster k is centered at radius * (cos, sin)(2 pi k / classes);
    the target centers are the source centers rotated by ``rotation``
    radians and then translated by ``shift``. Both domains carry ground
    truth labels (the trainer must only use the target's for evaluation).
    """
    if classes < 2:
        raise ConfigError("classes must be >= 2")
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    if not noise > 0:
        raise ConfigError("noise must be > 0")
    shift = np.asarray(shift, dtype=np.float64).ravel()
    if shift.shape != (2,):
        raise ConfigError(f"shift must be a 2-vector, got shape {shift.shape}")

    angles = 2.0 * np.pi * np.arange(classes) / classes
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    c, s = np.cos(rotation), np.sin(rotation)
    rot = np.array([[c, -s], [s, c]])
    target_means = means @ rot.T + shift

    ss_source, ss_target = np.random.SeedSequence(seed).spawn(2)
    labels = np.repeat(np.arange(classes), per_class)

    def sample(mu, ss, name):
        rng = np.random.default_rng(ss)
        x = mu[labels] + noise * rng.standard_normal((labels.size, 2))
        return DomainDataset(x, labels, classes, name)

    return sample(means, ss_source, "clusters-source"), sample(
        target_means, ss_target, "clusters-target"
    )


def make_partial_target(target: DomainDataset, keep_classes: int) -> DomainDataset:
    """Drop target samples whose true class index is >= ``keep_classes``.

    The label space (class_count) is left untouched: the classifier keeps
    the full source label set while the target only populates a subset.
    Surviving samples keep their original class indices.
    """
    if not 1 <= keep_classes <= target.class_count:
        raise ConfigError(
            f"keep_classes must be in [1, {target.class_count}], got {keep_classes}"
        )
    if np.any(target.labels < 0):
        raise DataError("partial construction needs ground-truth target labels")
    mask = target.labels < keep_classes
    if not mask.any():
        raise ConfigError("no target samples left after partial filtering")
    return DomainDataset(
        target.x[mask],
        target.labels[mask],
        target.class_count,
        f"{target.name}-first{keep_classes}",
    )


def load_csv(path, class_count: int | None = None) -> DomainDataset:
    """Read a dataset from CSV: header, float feature columns, int ``label`` last."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[-1].strip() != "label":
            raise DataError(f"{path}: last column must be named 'label'")
        n_feat = len(header) - 1
        if n_feat < 1:
            raise DataError(f"{path}: no feature columns")
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != n_feat + 1:
                raise DataError(f"{path}: line {lineno}: expected {n_feat + 1} fields")
            try:
                rows.append([float(v) for v in rec[:-1]])
                labels.append(int(rec[-1]))
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.max() >= 0 else 1
    return DomainDataset(np.asarray(rows), labels, class_count, str(path))


def save_csv(ds: DomainDataset, path):
    """Inverse of :func:`load_csv`; float64 values round-trip exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(ds.x.shape[1])] + ["label"])
        for xi, yi in zip(ds.x, ds.labels):
            writer.writerow([repr(float(v)) for v in xi] + [int(yi)])


def batch_sampler(ds: DomainDataset, n: int, seed: int):
    """Infinite stream of uniform-with-replacement index batches.

    Deterministic given the seed; ``n`` larger than the dataset is allowed.
    """
    if n < 1:
        raise ConfigError("batch size must be >= 1")
    rng = np.random.default_rng(seed)

    def stream():
        while True:
            yield rng.integers(0, ds.size, size=n)

    return stream()
