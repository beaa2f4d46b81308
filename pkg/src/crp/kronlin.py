"""Dense Kronecker / vectorization helpers and the symmetric-definite
generalized eigensolver used by every half-step of the CRP iteration.

Conventions
-----------
``vec`` stacks columns (Fortran order), so that

    vec(A X B) = kron(B.T, A) @ vec(X)

holds, and ``unvec`` is its exact inverse.
"""
import numpy as np
from scipy.linalg import eigh, solve_triangular

from .errors import DegenerateDirectionError, DimensionError, SingularityError

__all__ = [
    "kron",
    "vec",
    "unvec",
    "trace_bilinear",
    "gen_eigh",
    "solve_largest_gen_eig",
    "d_normalize",
    "fix_sign",
]

SYMMETRY_RTOL = 1e-10
JITTER_START = 1e-12
JITTER_RETRIES = 3


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got ndim={a.ndim}")
    return a


def kron(a, b):
    """Kronecker product: block (i, j) of the result is ``a[i, j] * b``.

    1-D inputs are treated as column vectors; if both are 1-D the result is
    returned as a 1-D vector.
    """
    both_vectors = np.ndim(a) == 1 and np.ndim(b) == 1
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    m, n = a.shape
    p, q = b.shape
    out = (a[:, None, :, None] * b[None, :, None, :]).reshape(m * p, n * q)
    return out.ravel() if both_vectors else out


def vec(m):
    """Column-stacking vectorization."""
    m = _as_matrix(m, "m")
    return m.reshape(-1, order="F").copy()


def unvec(v, r, c):
    """Inverse of :func:`vec`: reshape a length ``r*c`` vector to ``r x c``."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if r < 1 or c < 1 or v.size != r * c:
        raise DimensionError(f"cannot reshape vector of length {v.size} to {r}x{c}")
    return np.ascontiguousarray(v.reshape((r, c), order="F"))


def trace_bilinear(u, x, v):
    """``Tr(U^T X V)`` in O(l1*l2*k), without any Kronecker product."""
    u = _as_matrix(u, "u")
    x = _as_matrix(x, "x")
    v = _as_matrix(v, "v")
    if u.shape[0] != x.shape[0] or v.shape[0] != x.shape[1] or u.shape[1] != v.shape[1]:
        raise DimensionError(
            f"non-conformable shapes U{u.shape}, X{x.shape}, V{v.shape}"
        )
    return float(np.sum(u * (x @ v)))


def fix_sign(q):
    """Flip ``q`` so its largest-magnitude entry (first on ties) is positive."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 1:
        i = int(np.argmax(np.abs(q)))
        return -q if q[i] < 0 else q
    idx = np.argmax(np.abs(q), axis=0)
    signs = np.where(q[idx, np.arange(q.shape[1])] < 0, -1.0, 1.0)
    return q * signs


def _symmetrized(a, name):
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric to {SYMMETRY_RTOL:g} relative")
    return 0.5 * (a + a.T)


def _cholesky(n):
    try:
        return np.linalg.cholesky(n)
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(n) / n.shape[0]
    if not scale > 0:
        raise SingularityError("matrix is not positive definite (non-positive trace)")
    jitter = JITTER_START * scale
    eye = np.eye(n.shape[0])
    for _ in range(JITTER_RETRIES):
        try:
            return np.linalg.cholesky(n + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SingularityError(
        f"Cholesky factorization failed even with jitter {jitter / 10.0:.3g}"
    )


def _whiten(m, n):
    m = _symmetrized(m, "M")
    n = _symmetrized(n, "N")
    if m.shape != n.shape:
        raise DimensionError(f"M{m.shape} and N{n.shape} differ in order")
    low = _cholesky(n)
    y = solve_triangular(low, m, lower=True, check_finite=False)
    c = solve_triangular(low, y.T, lower=True, check_finite=False)
    return 0.5 * (c + c.T), low


def gen_eigh(m, n, top=None):
    """Generalized eigenpairs of the symmetric-definite pencil ``(M, N)``.

    Parameters
    ----------
    m : (p, p) array
        Symmetric (positive semidefinite) numerator.
    n : (p, p) array
        Symmetric positive definite denominator.
    top : int, optional
        Return only the ``top`` largest eigenpairs.

    Returns
    -------
    values : ndarray
        Eigenvalues in non-increasing order.
    vectors : ndarray
        Matching eigenvectors as columns, unit Euclidean norm, sign fixed by
        :func:`fix_sign`.
    """
    c, low = _whiten(m, n)
    p = c.shape[0]
    if top is None or top >= p:
        values, y = eigh(c, check_finite=False)
    else:
        values, y = eigh(c, subset_by_index=[p - top, p - 1], check_finite=False)
    values = values[::-1]
    y = y[:, ::-1]
    q = solve_triangular(low.T, y, lower=False, check_finite=False)
    q = q / np.linalg.norm(q, axis=0)
    return values, fix_sign(q)


def solve_largest_gen_eig(m, n):
    """Dominant generalized eigenpair ``(q, lambda)`` of ``M q = lambda N q``.

    ``q`` maximizes the Rayleigh quotient ``q'Mq / q'Nq``; it is returned
    with unit norm and a deterministic sign. ``lambda`` is clipped at zero
    since ``M`` is positive semidefinite.
    """
    values, vectors = gen_eigh(m, n, top=1)
    return vectors[:, 0].copy(), max(float(values[0]), 0.0)


def d_normalize(q, d, rtol=1e-14):
    """Rescale ``q`` so that ``q' D q == 1``."""
    q = np.asarray(q, dtype=np.float64).ravel()
    d = _as_matrix(d, "d")
    if d.shape != (q.size, q.size):
        raise DimensionError(f"D{d.shape} does not match q of length {q.size}")
    s = float(q @ d @ q)
    scale = float(q @ q) * (np.max(np.abs(d)) if d.size else 0.0)
    if not s > rtol * scale or not np.isfinite(s):
        raise DegenerateDirectionError(f"q'Dq = {s:.3g} is not positive")
    return q / np.sqrt(s)
