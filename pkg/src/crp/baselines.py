"""Classical LDA (on vectorized samples) and iterative 2DLDA."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularityError
from .kronlin import gen_eigh
from .stats import compute_class_stats

__all__ = [
    "LdaModel",
    "TwoDldaModel",
    "default_ridge",
    "fit_lda",
    "embed_lda",
    "transform_lda",
    "fit_2dlda",
    "embed_2dlda",
    "transform_2dlda",
    "twodlda_objective",
]

RIDGE_FRACTION = 1e-3


def _vectorize(X):
    X = np.asarray(X, dtype=np.float64)
    # column-stacking vec of every sample
    return X.transpose(0, 2, 1).reshape(X.shape[0], -1)


def default_ridge(sw):
    """``1e-3 * trace(S_w) / dim``."""
    return RIDGE_FRACTION * float(np.trace(sw)) / sw.shape[0]


def _regularize(sw, ridge):
    if ridge is None:
        ridge = default_ridge(sw)
    ridge = float(ridge)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge:
        sw = sw + ridge * np.eye(sw.shape[0])
    else:
        w = np.linalg.eigvalsh(sw)
        if w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny):
            raise SingularityError("within-class scatter is singular and ridge is 0")
    return sw, ridge


def _top_eigvecs(sb, sw, dims):
    try:
        values, vectors = gen_eigh(sb, sw)
    except SingularityError as exc:
        raise SingularityError(f"within-class scatter is singular: {exc}") from exc
    return values[:dims], vectors[:, :dims]


@dataclass(frozen=True, eq=False)
class LdaModel:
    w: np.ndarray  # (l1*l2, dims)
    ridge: float
    mean: np.ndarray  # (l1*l2,)
    eigenvalues: np.ndarray
    data_dims: tuple


def fit_lda(d, dims, ridge=None):
    """Fisher LDA on column-stacked samples.

    Solves ``S_b w = lambda (S_w + ridge I) w`` and keeps the ``dims``
    leading eigenvectors, including near-zero ones when ``dims`` exceeds
    the rank of ``S_b``. ``ridge=None`` selects :func:`default_ridge`.
    """
    l1, l2 = d.shape
    dims = int(dims)
    if not 1 <= dims <= l1 * l2:
        raise DimensionError(f"dims={dims} must lie in [1, {l1 * l2}]")
    s = compute_class_stats(d)
    Z = _vectorize(d.X)
    means = _vectorize(s.class_means)
    mu = _vectorize(s.global_mean[None])[0]
    B = (means - mu) * np.sqrt(s.counts)[:, None]
    sb = B.T @ B
    W = Z - means[d.y]
    sw, ridge = _regularize(W.T @ W, ridge)
    values, vectors = _top_eigvecs(sb, sw, dims)
    return LdaModel(vectors, ridge, mu, np.maximum(values, 0.0), (l1, l2))


def transform_lda(m, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.shape[1:] != tuple(m.data_dims):
        raise DimensionError(f"inputs of shape {X.shape[1:]} do not match {m.data_dims}")
    return (_vectorize(X) - m.mean) @ m.w


def embed_lda(m, x):
    return transform_lda(m, x)[0]


@dataclass(frozen=True, eq=False)
class TwoDldaModel:
    u: np.ndarray  # (l1, d1)
    v: np.ndarray  # (l2, d2)
    iterations: int
    objectives: tuple = ()


def _side_scatters(between, within, counts, factor, transpose):
    # rows-side scatter pair for fixed right factor (or columns-side for
    # fixed left factor when transpose is set)
    if transpose:
        between = between.transpose(0, 2, 1)
        within = within.transpose(0, 2, 1)
    pb = between @ factor
    pw = within @ factor
    sb = np.einsum("i,iak,ibk->ab", counts.astype(np.float64), pb, pb)
    sw = np.einsum("jak,jbk->ab", pw, pw)
    return sb, sw


def twodlda_objective(u, v, between, within, counts):
    """``Tr(S~_w^{-1} S~_b)`` with ``S~ = U' S^V U`` (unregularized)."""
    sb, sw = _side_scatters(between, within, counts, v, transpose=False)
    tb = u.T @ sb @ u
    tw = u.T @ sw @ u
    return float(np.trace(np.linalg.lstsq(tw, tb, rcond=None)[0]))


def fit_2dlda(d, d1, d2, iters=1, ridge=None):
    """Alternating 2DLDA: with ``V`` fixed take ``U`` from the row-side
    scatter pair, then update ``V`` from the column-side pair, ``iters``
    times. ``V`` starts as the top-left identity block."""
    l1, l2 = d.shape
    d1, d2, iters = int(d1), int(d2), int(iters)
    if not (1 <= d1 <= l1 and 1 <= d2 <= l2):
        raise DimensionError(f"(d1, d2)=({d1}, {d2}) must fit in ({l1}, {l2})")
    if iters < 1:
        raise ValueError("iters must be positive")
    s = compute_class_stats(d)
    between = s.class_means - s.global_mean
    within = d.X - s.class_means[d.y]
    v = np.eye(l2, d2)
    u = None
    objectives = []
    for _ in range(iters):
        sb, sw = _side_scatters(between, within, s.counts, v, transpose=False)
        sw, _ = _regularize(sw, ridge)
        u = _top_eigvecs(sb, sw, d1)[1]
        sb, sw = _side_scatters(between, within, s.counts, u, transpose=True)
        sw, _ = _regularize(sw, ridge)
        v = _top_eigvecs(sb, sw, d2)[1]
        objectives.append(twodlda_objective(u, v, between, within, s.counts))
    return TwoDldaModel(u, v, iters, tuple(objectives))


def transform_2dlda(m, X):
    """``vec(U' X V)`` for each matrix, column-stacked."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.shape[1:] != (m.u.shape[0], m.v.shape[0]):
        raise DimensionError(f"inputs of shape {X.shape[1:]} do not match "
                             f"({m.u.shape[0]}, {m.v.shape[0]})")
    Y = m.u.T @ X @ m.v
    return Y.transpose(0, 2, 1).reshape(X.shape[0], -1)


def embed_2dlda(m, x):
    return transform_2dlda(m, x)[0]
