"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imported cleanly;
otherwise (or when ``CRP_PURE_PYTHON`` is set to a non-empty value) the
numpy implementations in ``_pykernels`` are used. Both expose the same four
functions and agree to rounding error.
"""
import contextlib
import os

from . import _pykernels

try:
    if os.environ.get("CRP_PURE_PYTHON"):
        raise ImportError("compiled kernels disabled by CRP_PURE_PYTHON")
    from . import _ckernels
except ImportError:
    _ckernels = None

__all__ = [
    "available_backends",
    "get_backend",
    "set_backend",
    "use_backend",
    "side_scatter",
    "bilinear_traces",
    "deflate",
    "nearest_neighbors",
]

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = "compiled" if _ckernels is not None else "python"


def available_backends():
    return sorted(_BACKENDS)


def get_backend():
    return _active


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; "
                         f"have {available_backends()}")
    _active = name


@contextlib.contextmanager
def use_backend(name):
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def side_scatter(devs, factor, transpose=False):
    return _BACKENDS[_active].side_scatter(devs, factor, transpose)


def bilinear_traces(X, u, v):
    return _BACKENDS[_active].bilinear_traces(X, u, v)


def deflate(X, u, v):
    return _BACKENDS[_active].deflate(X, u, v)


def nearest_neighbors(train, queries):
    if len(train) == 0:
        raise ValueError("nearest-neighbor search needs at least one training vector")
    return _BACKENDS[_active].nearest_neighbors(train, queries)
