"""Stratified splits, 1-nearest-neighbor classification and repeated-trial
evaluation."""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InsufficientSamplesError, TrialError

logger = logging.getLogger(__name__)

__all__ = [
    "SplitSpec",
    "EvalResult",
    "split_rng",
    "stratified_split",
    "nn_classify",
    "nn_predict",
    "accuracy",
    "evaluate_protocol",
]


@dataclass(frozen=True)
class SplitSpec:
    """Per-class training count (``per_class``) or training ``fraction``.

    Exactly one of the two is set.
    """

    per_class: int | None = None
    fraction: float | None = None
    repetitions: int = 5
    seed: int = 0

    def __post_init__(self):
        if (self.per_class is None) == (self.fraction is None):
            raise ValueError("set exactly one of per_class and fraction")
        if self.per_class is not None and int(self.per_class) < 1:
            raise ValueError("per_class must be a positive integer")
        if self.fraction is not None and not 0 < float(self.fraction) < 1:
            raise ValueError("fraction must lie in (0, 1)")
        if int(self.repetitions) < 1:
            raise ValueError("repetitions must be positive")

    @property
    def mode(self):
        return "per_class" if self.per_class is not None else "fraction"

    def train_count(self, class_size):
        if self.per_class is not None:
            return int(self.per_class)
        return int(math.floor(float(self.fraction) * class_size))


@dataclass(frozen=True)
class EvalResult:
    per_trial_accuracy: tuple
    mean: float
    std: float
    extras: tuple = field(default=(), compare=False)

    @classmethod
    def from_trials(cls, accuracies, extras=()):
        a = np.asarray(accuracies, dtype=np.float64)
        # population standard deviation over trials
        return cls(tuple(float(x) for x in a), float(a.mean()), float(a.std()),
                   tuple(extras))


def split_rng(seed, trial):
    """Counter-based generator keyed by ``(seed, trial)``."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial) & 0xFFFFFFFFFFFFFFFF]
    return np.random.Generator(np.random.Philox(key=key))


def stratified_split(d, spec, trial):
    """Deterministic per-class train/test partition for one trial.

    Both parts keep the original sample order.
    """
    rng = split_rng(spec.seed, trial)
    counts = d.counts()
    train_idx = []
    for i in range(d.n_classes):
        members = np.flatnonzero(d.y == i)
        if members.size == 0:
            continue
        n_train = spec.train_count(members.size)
        if spec.per_class is not None and n_train > members.size:
            raise InsufficientSamplesError(
                f"class {i} has {members.size} samples, {n_train} requested for training")
        if spec.fraction is not None and not 1 <= n_train < members.size:
            raise InsufficientSamplesError(
                f"fraction {spec.fraction} leaves class {i} (size {counts[i]}) "
                f"with {n_train} training and {members.size - n_train} test samples")
        train_idx.append(rng.permutation(members)[:n_train])
    train_mask = np.zeros(len(d), dtype=bool)
    if train_idx:
        train_mask[np.concatenate(train_idx)] = True
    return d.subset(np.flatnonzero(train_mask)), d.subset(np.flatnonzero(~train_mask))


def nn_predict(train_vectors, train_labels, queries):
    """1-NN labels for a batch of query vectors (ties: lowest training index)."""
    train_vectors = np.atleast_2d(np.asarray(train_vectors, dtype=np.float64))
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if train_vectors.shape[0] == 0 or np.size(train_labels) == 0:
        raise ValueError("1-NN needs a nonempty training set")
    if queries.shape[1] != train_vectors.shape[1]:
        raise ValueError(f"query length {queries.shape[1]} != training length "
                         f"{train_vectors.shape[1]}")
    idx = kernels.nearest_neighbors(train_vectors, queries)
    return np.asarray(train_labels)[idx]


def nn_classify(train, query):
    """Label of the Euclidean-nearest vector in ``train = [(vector, label), ...]``."""
    if not train:
        raise ValueError("1-NN needs a nonempty training set")
    vectors = np.stack([np.asarray(t[0], dtype=np.float64).ravel() for t in train])
    labels = np.array([t[1] for t in train])
    return nn_predict(vectors, labels, np.asarray(query, dtype=np.float64).ravel()[None])[0]


def accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    return float(np.mean(pred == truth)) if truth.size else float("nan")


def _run_trial(d, method, spec, trial):
    train, test = stratified_split(d, spec, trial)
    embedder = method(train)
    F_train = embedder(train.X)
    F_test = embedder(test.X)
    pred = nn_predict(F_train, train.y, F_test)
    return accuracy(pred, test.y), getattr(embedder, "info", None)


def _run_trial_safe(d, method, spec, trial, label):
    try:
        return _run_trial(d, method, spec, trial)
    except Exception as exc:
        raise TrialError(trial, exc, label) from exc


def evaluate_protocol(d, method, spec, jobs=1, label=None):
    """Repeat split / fit / embed / 1-NN for ``spec.repetitions`` trials.

    Parameters
    ----------
    d : Dataset
    method : callable
        ``method(train_dataset)`` returns an embedder: a callable mapping an
        ``(n, l1, l2)`` stack to ``(n, f)`` features. An ``info`` attribute on
        the embedder, if present, is collected into ``EvalResult.extras``.
    spec : SplitSpec
    jobs : int
        Worker processes; results do not depend on it.
    """
    trials = range(int(spec.repetitions))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_trial_safe, d, method, spec, t, label) for t in trials]
            results = [f.result() for f in futures]
    else:
        results = [_run_trial_safe(d, method, spec, t, label) for t in trials]
    return EvalResult.from_trials([r[0] for r in results], [r[1] for r in results])
