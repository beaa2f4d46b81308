"""numpy implementations of the hot kernels (fallback backend).

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics; ``crp.kernels`` picks one at import time.
"""
import numpy as np

# query block size for the 1-NN search is chosen so a block of differences
# stays under roughly this many doubles
_NN_BLOCK_ELEMS = 1 << 22


def side_scatter(devs, factor, transpose=False):
    """Sum over samples of ``w w'`` with ``w = vec(D F)`` (or ``vec(D' F)``).

    ``devs`` is an ``(n, l1, l2)`` stack. Without ``transpose`` the factor is
    ``(l2, k)`` and the result has order ``l1*k``; with it the factor is
    ``(l1, k)`` and the order is ``l2*k``.
    """
    devs = np.asarray(devs, dtype=np.float64)
    factor = np.asarray(factor, dtype=np.float64)
    n = devs.shape[0]
    if transpose:
        proj = np.matmul(devs.transpose(0, 2, 1), factor)
    else:
        proj = np.matmul(devs, factor)
    w = proj.transpose(0, 2, 1).reshape(n, proj.shape[1] * proj.shape[2])
    return w.T @ w


def bilinear_traces(X, u, v):
    """``Tr(U' X_j V)`` for every matrix in the stack."""
    X = np.asarray(X, dtype=np.float64)
    p = np.asarray(u, dtype=np.float64) @ np.asarray(v, dtype=np.float64).T
    return X.reshape(X.shape[0], p.size) @ p.ravel()


def deflate(X, u, v):
    """Remove from each sample its component along ``U V'``.

    Returns the deflated stack and the removed coefficients.
    """
    X = np.asarray(X, dtype=np.float64)
    p = np.asarray(u, dtype=np.float64) @ np.asarray(v, dtype=np.float64).T
    t = X.reshape(X.shape[0], p.size) @ p.ravel()
    return X - t[:, None, None] * p, t


def nearest_neighbors(train, queries):
    """Index of the Euclidean-nearest training row for every query row.

    Ties resolve to the lowest training index.
    """
    train = np.asarray(train, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    m, f = train.shape
    out = np.empty(queries.shape[0], dtype=np.int64)
    block = max(1, _NN_BLOCK_ELEMS // max(1, m * f))
    for start in range(0, queries.shape[0], block):
        q = queries[start:start + block]
        diff = q[:, None, :] - train[None, :, :]
        d2 = np.einsum("qmf,qmf->qm", diff, diff)
        out[start:start + block] = np.argmin(d2, axis=1)
    return out
