"""Matrix-valued labeled datasets and their per-class statistics."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, EmptyClassError, EmptyDatasetError

__all__ = [
    "LabeledMatrix",
    "Dataset",
    "ClassStats",
    "compute_class_stats",
    "between_deviations",
    "within_deviations",
]


class LabeledMatrix(NamedTuple):
    data: np.ndarray
    label: int


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` samples of shape ``(l1, l2)`` with integer labels in ``[0, c)``.

    The sample stack ``X`` has shape ``(n, l1, l2)``; it keeps its trailing
    dimensions even when ``n == 0``. Arrays are stored read-only.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = _frozen(self.X)
        y = np.array(self.y, dtype=np.int64, copy=True).ravel()
        y.flags.writeable = False
        if X.ndim != 3:
            raise DimensionError(f"sample stack must be (n, l1, l2), got shape {X.shape}")
        if X.shape[1] < 1 or X.shape[2] < 1:
            raise DimensionError(f"matrix dimensions must be positive, got {X.shape[1:]}")
        if y.shape[0] != X.shape[0]:
            raise DimensionError(f"{y.shape[0]} labels for {X.shape[0]} samples")
        if not np.all(np.isfinite(X)):
            raise ValueError("dataset contains non-finite entries")
        c = int(self.n_classes)
        if c < 1:
            raise ValueError("n_classes must be positive")
        if y.size and (y.min() < 0 or y.max() >= c):
            raise ValueError(f"labels must lie in [0, {c})")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n_classes", c)

    @classmethod
    def from_samples(cls, samples, n_classes=None, shape=None):
        """Build from an iterable of ``LabeledMatrix`` (or ``(matrix, label)``)."""
        samples = list(samples)
        if samples:
            X = np.stack([np.asarray(s[0], dtype=np.float64) for s in samples])
            y = np.array([int(s[1]) for s in samples], dtype=np.int64)
        else:
            if shape is None:
                raise EmptyDatasetError("cannot infer matrix shape of an empty dataset")
            X = np.zeros((0,) + tuple(shape))
            y = np.zeros(0, dtype=np.int64)
        if n_classes is None:
            n_classes = int(y.max()) + 1 if y.size else 1
        return cls(X, y, n_classes)

    @property
    def shape(self):
        return self.X.shape[1], self.X.shape[2]

    @property
    def l1(self):
        return self.X.shape[1]

    @property
    def l2(self):
        return self.X.shape[2]

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        for x, label in zip(self.X, self.y):
            yield LabeledMatrix(x, int(label))

    def __getitem__(self, i):
        return LabeledMatrix(self.X[i], int(self.y[i]))

    def counts(self):
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.n_classes)

    def with_data(self, X):
        """Same labels and class count, different sample matrices."""
        return Dataset(X, self.y, self.n_classes)


@dataclass(frozen=True, eq=False)
class ClassStats:
    class_means: np.ndarray  # (c, l1, l2)
    global_mean: np.ndarray  # (l1, l2)
    counts: np.ndarray  # (c,)

    @property
    def n(self):
        return int(self.counts.sum())


def compute_class_stats(d):
    """Class means, global mean and per-class counts of ``d``.

    Sums are taken class by class in stored sample order, so the result is
    bit-reproducible for a given dataset.
    """
    if len(d) == 0:
        raise EmptyDatasetError("cannot compute statistics of an empty dataset")
    counts = d.counts()
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyClassError(f"classes without samples: {empty.tolist()}")
    sums = np.empty((d.n_classes,) + d.shape)
    for i in range(d.n_classes):
        sums[i] = d.X[d.y == i].sum(axis=0)
    global_mean = sums.sum(axis=0) / len(d)
    means = sums / counts[:, None, None]
    return ClassStats(_frozen(means), _frozen(global_mean), counts)


def between_deviations(s):
    """Unweighted deviations of each class mean from the global mean."""
    return s.class_means - s.global_mean


def within_deviations(d, s):
    """Deviation of every sample from its own class mean, in dataset order."""
    return d.X - s.class_means[d.y]
