"""Numerical check of the Kronecker / vec / trace identities the CRP
derivation relies on, on random conformable instances."""
from dataclasses import dataclass

import numpy as np

from . import kronlin

__all__ = ["LemmaResult", "LEMMAS", "check_lemmas", "format_report"]

MAX_DIM = 6


def _rel_err(lhs, rhs):
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), np.finfo(float).tiny)
    return float(np.linalg.norm(lhs - rhs) / scale)


def _dims(rng, count):
    return [int(x) for x in rng.integers(1, MAX_DIM + 1, size=count)]


def _lemma1(rng, kron):
    l1, l2, k = _dims(rng, 3)
    u, v, x = rng.standard_normal((l1, k)), rng.standard_normal((l2, k)), rng.standard_normal((l1, l2))
    p = kronlin.vec(u @ v.T)
    lhs = np.outer(p, p) @ kronlin.vec(x)
    rhs = kronlin.trace_bilinear(u, x, v) * p
    return _rel_err(lhs, rhs), {"U": u.shape, "V": v.shape, "X": x.shape}


def _lemma2(rng, kron):
    l1, l2, k = _dims(rng, 3)
    u, v = rng.standard_normal((l1, k)), rng.standard_normal((l2, k))
    rhs = sum(kron(v[:, i], u[:, i]) for i in range(k))
    return _rel_err(kronlin.vec(u @ v.T), rhs), {"U": u.shape, "V": v.shape}


def _lemma3(rng, kron):
    l1, l2, k = _dims(rng, 3)
    u, v = rng.standard_normal((l1, k)), rng.standard_normal((l2, k))
    p = kronlin.vec(u @ v.T)
    return _rel_err(p @ p, np.trace(u.T @ u @ v.T @ v)), {"U": u.shape, "V": v.shape}


def _lemma4(rng, kron):
    p, q, r = _dims(rng, 3)
    a, b, c = rng.standard_normal((p, r)), rng.standard_normal((p, q)), rng.standard_normal((q, r))
    rhs = kronlin.vec(a) @ kron(np.eye(r), b) @ kronlin.vec(c)
    return _rel_err(np.trace(a.T @ b @ c), rhs), {"A": a.shape, "B": b.shape, "C": c.shape}


def _lemma5(rng, kron):
    p, q, r, s = _dims(rng, 4)
    a, x, b = rng.standard_normal((p, q)), rng.standard_normal((q, r)), rng.standard_normal((r, s))
    rhs = kron(b.T, a) @ kronlin.vec(x)
    return _rel_err(kronlin.vec(a @ x @ b), rhs), {"A": a.shape, "X": x.shape, "B": b.shape}


def _lemma6(rng, kron):
    p, q, r = _dims(rng, 3)
    a, b, c = rng.standard_normal((p, r)), rng.standard_normal((p, q)), rng.standard_normal((q, r))
    rhs = kronlin.vec(a) @ kron(c.T, np.eye(p)) @ kronlin.vec(b)
    return _rel_err(np.trace(a.T @ b @ c), rhs), {"A": a.shape, "B": b.shape, "C": c.shape}


LEMMAS = {
    "Lemma 1": ("vec(UV')vec(UV')'vec(X) = Tr(U'XV) vec(UV')", _lemma1),
    "Lemma 2": ("vec(UV') = sum_i kron(v_i, u_i)", _lemma2),
    "Lemma 3": ("vec(UV')'vec(UV') = Tr(U'U V'V)", _lemma3),
    "Lemma 4": ("Tr(A'BC) = vec(A)' kron(I, B) vec(C)", _lemma4),
    "Lemma 5": ("vec(AXB) = kron(B', A) vec(X)", _lemma5),
    "Lemma 6": ("Tr(A'BC) = vec(A)' kron(C', I) vec(B)", _lemma6),
}


@dataclass(frozen=True)
class LemmaResult:
    name: str
    statement: str
    trials: int
    max_rel_error: float
    worst_shapes: dict
    passed: bool


def check_lemmas(trials, seed=0, tol=1e-9, kron=None):
    """Evaluate every identity on ``trials`` random instances.

    ``kron`` overrides the Kronecker implementation under test (defaults to
    :func:`crp.kronlin.kron`, looked up at call time).
    """
    if int(trials) < 1:
        raise ValueError("trials must be positive")
    kron = kron if kron is not None else kronlin.kron
    rng = np.random.default_rng(seed)
    results = []
    for name, (statement, fn) in LEMMAS.items():
        worst, worst_shapes = 0.0, {}
        for _ in range(int(trials)):
            err, shapes = fn(rng, kron)
            if not err <= worst:
                worst, worst_shapes = err, shapes
        results.append(LemmaResult(name, statement, int(trials), worst,
                                   {k: list(v) for k, v in worst_shapes.items()},
                                   bool(worst <= tol)))
    return results


def format_report(results, tol=1e-9):
    lines = []
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        line = f"{status} {r.name}: max rel error {r.max_rel_error:.3e} over {r.trials} trials"
        if not r.passed:
            shapes = ", ".join(f"{k}{tuple(v)}" for k, v in r.worst_shapes.items())
            line += f" (> {tol:g}; worst shapes {shapes})"
        lines.append(line)
    return "\n".join(lines)
