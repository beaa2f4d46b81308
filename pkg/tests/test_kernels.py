import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crp import _pykernels, kernels
from crp.kronlin import trace_bilinear, vec


def brute_side_scatter(devs, factor, transpose):
    out = 0
    for dev in devs:
        w = vec((dev.T if transpose else dev) @ factor)
        out = out + np.outer(w, w)
    return out


shapes = st.tuples(st.integers(0, 7), st.integers(1, 6), st.integers(1, 6), st.integers(1, 3))


@settings(max_examples=40, deadline=None)
@given(shapes, st.booleans(), st.integers(0, 2**32 - 1))
def test_side_scatter_all_backends(shape, transpose, seed):
    n, l1, l2, k = shape
    rng = np.random.default_rng(seed)
    devs = rng.standard_normal((n, l1, l2))
    factor = rng.standard_normal((l1 if transpose else l2, k))
    order = (l2 if transpose else l1) * k
    ref = brute_side_scatter(devs, factor, transpose) if n else np.zeros((order, order))
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            got = kernels.side_scatter(devs, factor, transpose)
        assert got.shape == (order, order)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(ref).max()))
        np.testing.assert_array_equal(got, got.T)


@settings(max_examples=40, deadline=None)
@given(shapes, st.integers(0, 2**32 - 1))
def test_traces_and_deflate_all_backends(shape, seed):
    n, l1, l2, k = shape
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, l1, l2))
    u, v = rng.standard_normal((l1, k)), rng.standard_normal((l2, k))
    t_ref = np.array([trace_bilinear(u, x, v) for x in X])
    p = u @ v.T
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            t = kernels.bilinear_traces(X, u, v)
            out, t2 = kernels.deflate(X, u, v)
        np.testing.assert_allclose(t, t_ref, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(t2, t_ref, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(out, X - t_ref[:, None, None] * p, rtol=1e-12, atol=1e-12)
        assert out.shape == X.shape


def test_kernels_accept_non_contiguous_input(backend):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 5, 4)).transpose(0, 2, 1)
    u, v = rng.standard_normal((4, 2)), rng.standard_normal((5, 2))
    np.testing.assert_allclose(kernels.bilinear_traces(X, u, v),
                               _pykernels.bilinear_traces(np.ascontiguousarray(X), u, v),
                               rtol=1e-12)
    out, _ = kernels.deflate(X, u, v)
    ref, _ = _pykernels.deflate(np.ascontiguousarray(X), u, v)
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)
    assert out.flags.writeable


def test_deflate_does_not_modify_input(backend):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((3, 2, 2))
    keep = X.copy()
    kernels.deflate(X, rng.standard_normal((2, 1)), rng.standard_normal((2, 1)))
    np.testing.assert_array_equal(X, keep)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 10), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_nearest_neighbors_all_backends(m, q, f, seed):
    rng = np.random.default_rng(seed)
    # small integer grid so exact ties are common
    train = rng.integers(-2, 3, size=(m, f)).astype(float)
    queries = rng.integers(-2, 3, size=(q, f)).astype(float)
    d2 = ((queries[:, None, :] - train[None, :, :]) ** 2).sum(-1)
    ref = [int(np.flatnonzero(row == row.min())[0]) for row in d2]
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            got = kernels.nearest_neighbors(train, queries)
        assert list(got) == ref


def test_nearest_neighbors_empty_train(backend):
    with pytest.raises(ValueError):
        kernels.nearest_neighbors(np.zeros((0, 3)), np.zeros((1, 3)))


def test_backend_switching():
    names = kernels.available_backends()
    assert "python" in names
    before = kernels.get_backend()
    with kernels.use_backend("python"):
        assert kernels.get_backend() == "python"
    assert kernels.get_backend() == before
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_pure_python_env_var_disables_compiled():
    import subprocess
    import sys
    code = "from crp import kernels; print(kernels.get_backend())"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"CRP_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
