# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np

from scipy.linalg.cython_blas cimport dgemm, dgemv, dger, dsyrk


cdef void _project(const double[:, :, ::1] devs, const double[:, ::1] factor,
                   bint transpose, double[:, ::1] w) noexcept nogil:
    # Row j of w, read column-major, is the projected sample (D F or D' F)
    # with the reshaped layout vec() expects. A row-major D buffer is D' to
    # column-major BLAS and a row-major F buffer is F'.
    cdef int l1 = <int>devs.shape[1], l2 = <int>devs.shape[2]
    cdef int k = <int>factor.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ta, tb = b'T'
    cdef int m, inner, lda
    cdef Py_ssize_t j
    if transpose:
        ta, m, inner, lda = b'N', l2, l1, l2
    else:
        ta, m, inner, lda = b'T', l1, l2, l2
    for j in range(devs.shape[0]):
        dgemm(&ta, &tb, &m, &k, &inner, &one, &devs[j, 0, 0], &lda,
              &factor[0, 0], &k, &zero, &w[j, 0], &m)


def side_scatter(devs, factor, bint transpose=False):
    cdef const double[:, :, ::1] d = np.ascontiguousarray(devs, dtype=np.float64)
    cdef const double[:, ::1] f = np.ascontiguousarray(factor, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t r = d.shape[2] if transpose else d.shape[1]
    cdef int m = <int>(r * f.shape[1])
    w_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    g_arr = np.zeros((m, m), dtype=np.float64)
    cdef double[:, ::1] g = g_arr
    cdef int nn = <int>n
    cdef double one = 1.0, zero = 0.0
    cdef char uplo = b'U'
    cdef char trans = b'N'
    cdef Py_ssize_t a, b
    if n == 0 or m == 0:
        return g_arr
    with nogil:
        _project(d, f, transpose, w)
        # column-major view of w is the (m x n) matrix W'; W'W lands in the
        # upper triangle of column-major g, i.e. the lower triangle here
        dsyrk(&uplo, &trans, &m, &nn, &one, &w[0, 0], &m, &zero, &g[0, 0], &m)
        for a in range(m):
            for b in range(a + 1, m):
                g[a, b] = g[b, a]
    return g_arr


cdef void _outer(const double[:, ::1] u, const double[:, ::1] v,
                 double[:, ::1] p) noexcept nogil:
    cdef Py_ssize_t l1 = u.shape[0], l2 = v.shape[0], k = u.shape[1]
    cdef Py_ssize_t a, b, c
    cdef double acc
    for a in range(l1):
        for b in range(l2):
            acc = 0.0
            for c in range(k):
                acc += u[a, c] * v[b, c]
            p[a, b] = acc


cdef void _traces(const double[:, :, ::1] X, const double[:, ::1] p,
                  double[::1] t) noexcept nogil:
    # the row-major (n, l1*l2) stack is an (l1*l2, n) column-major matrix A;
    # t = A' vec_rowmajor(p)
    cdef int f = <int>(X.shape[1] * X.shape[2]), n = <int>X.shape[0]
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char tr = b'T'
    dgemv(&tr, &f, &n, &one, &X[0, 0, 0], &f, &p[0, 0], &inc, &zero, &t[0], &inc)


def bilinear_traces(X, u, v):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    p_arr = np.empty((x.shape[1], x.shape[2]), dtype=np.float64)
    t_arr = np.empty(x.shape[0], dtype=np.float64)
    cdef double[:, ::1] p = p_arr
    cdef double[::1] t = t_arr
    if x.shape[0] == 0:
        return t_arr
    with nogil:
        _outer(uu, vv, p)
        _traces(x, p, t)
    return t_arr


def deflate(X, u, v):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    p_arr = np.empty((x.shape[1], x.shape[2]), dtype=np.float64)
    t_arr = np.empty(n, dtype=np.float64)
    out_arr = np.array(x, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] p = p_arr
    cdef double[::1] t = t_arr
    cdef double[:, :, ::1] out = out_arr
    cdef int f = <int>(x.shape[1] * x.shape[2]), nn = <int>n, inc = 1
    cdef double minus = -1.0
    if n == 0:
        return out_arr, t_arr
    with nogil:
        _outer(uu, vv, p)
        _traces(x, p, t)
        # out (column-major f x n) -= vec(p) t'
        dger(&f, &nn, &minus, &p[0, 0], &inc, &t[0], &inc, &out[0, 0, 0], &f)
    return out_arr, t_arr


def nearest_neighbors(train, queries):
    cdef const double[:, ::1] tr = np.ascontiguousarray(train, dtype=np.float64)
    cdef const double[:, ::1] qs = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t m = tr.shape[0], f = tr.shape[1], nq = qs.shape[0]
    out_arr = np.empty(nq, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, j, e, best
    cdef double dist, diff, best_dist
    with nogil:
        for i in range(nq):
            best = 0
            best_dist = 0.0
            for j in range(m):
                dist = 0.0
                for e in range(f):
                    diff = qs[i, e] - tr[j, e]
                    dist += diff * diff
                if j == 0 or dist < best_dist:
                    best = j
                    best_dist = dist
            out[i] = best
    return out_arr
