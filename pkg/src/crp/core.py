"""Compound rank-k projections.

Each projection pair ``(U, V)`` (``U`` is ``l1 x k``, ``V`` is ``l2 x k``)
maximizes the regularized bilinear trace ratio

    sum_i Tr(U'(Xbar_i - Xbar)V)^2
    -------------------------------------------------------------
    sum_j Tr(U'(X_j - Xbar_{c(j)})V)^2 + lam * Tr(U'U V'V)

subject to ``Tr(U'U V'V) = 1``, by alternating two generalized eigenvalue
problems (one in ``vec(U)``, one in ``vec(V)``). After a pair is fit, every
training sample is deflated along the unit direction ``vec(U V')`` and the
next pair is fit on the deflated data.
"""
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import (
    DimensionError,
    IllPosedError,
    NumericalFailureError,
    PreconditionError,
)
from .kronlin import d_normalize, solve_largest_gen_eig, unvec
from .stats import between_deviations, compute_class_stats, within_deviations

logger = logging.getLogger(__name__)

__all__ = [
    "CrpConfig",
    "ProjectionPair",
    "SideProblem",
    "CrpModel",
    "initial_v",
    "assemble_u_problem",
    "assemble_v_problem",
    "objective_pair",
    "fit_pair",
    "deflate",
    "fit_crp",
    "embed",
    "transform",
    "embed_dataset",
]

INIT_MODES = ("identity", "random")
CONSTRAINT_ATOL = 1e-6
# a pair whose between-class numerator falls below this fraction of the mean
# squared sample norm is flagged as degenerate
DEGENERATE_RTOL = 1e-12


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CrpConfig:
    """Hyperparameters of a CRP fit.

    ``h=None`` resolves to ``(c - 1)**2`` at fit time. ``init`` is either
    ``"identity"`` (the top ``k x k`` block of ``V`` is ``init_scale * I``)
    or ``"random"`` (Gaussian entries drawn from ``seed`` and the pair index).
    ``replay`` controls whether embedding re-applies the training deflations.
    """

    h: int | None = None
    k: int = 2
    lam: float = 1.0
    tol: float = 1e-6
    max_iter: int = 50
    init: str = "identity"
    init_scale: float = 1.0
    seed: int = 0
    replay: bool = True

    def __post_init__(self):
        if self.h is not None and int(self.h) < 1:
            raise ValueError("h must be a positive integer")
        if int(self.k) < 1:
            raise ValueError("k must be a positive integer")
        if not float(self.lam) >= 0:
            raise ValueError("lam must be nonnegative")
        if not float(self.tol) > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.init == "identity" and not float(self.init_scale) > 0:
            raise ValueError("init_scale must be positive")

    def resolved_h(self, n_classes):
        return int(self.h) if self.h is not None else (n_classes - 1) ** 2

    def to_dict(self):
        return {
            "h": self.h,
            "k": self.k,
            "lambda": self.lam,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "init": self.init,
            "init_scale": self.init_scale,
            "seed": self.seed,
            "replay": self.replay,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _readonly(self.u)
        v = _readonly(self.v)
        if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
            raise DimensionError(f"incompatible factors U{u.shape}, V{v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def k(self):
        return self.u.shape[1]

    def constraint(self):
        """``Tr(U'U V'V)``, the squared Frobenius norm of ``U V'``."""
        return float(np.sum((self.u.T @ self.u) * (self.v.T @ self.v)))

    def direction(self):
        return self.u @ self.v.T


@dataclass(frozen=True, eq=False)
class SideProblem:
    """One half-step: maximize ``q'Mq / q'Nq`` subject to ``q'Dq = 1``."""

    d: np.ndarray
    m: np.ndarray
    n: np.ndarray


@dataclass(frozen=True, eq=False)
class CrpModel:
    pairs: tuple
    config: CrpConfig
    objective_traces: tuple
    data_dims: tuple
    degenerate: tuple = field(default=())

    @property
    def h(self):
        return len(self.pairs)


def _gram_is_singular(f):
    g = f.T @ f
    w = np.linalg.eigvalsh(0.5 * (g + g.T))
    return w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny)


def _assemble(between, within, factor, lam, transpose):
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    factor = np.asarray(factor, dtype=np.float64)
    if lam == 0 and _gram_is_singular(factor):
        raise IllPosedError("projection factor has singular Gram matrix and lam == 0")
    rows = between.shape[2] if transpose else between.shape[1]
    d = np.kron(factor.T @ factor, np.eye(rows))
    m = kernels.side_scatter(between, factor, transpose)
    n = kernels.side_scatter(within, factor, transpose)
    if lam:
        n = n + lam * d
    return SideProblem(d, m, n)


def _check_factor(stack, factor, axis, name):
    factor = np.asarray(factor, dtype=np.float64)
    if factor.ndim != 2 or factor.shape[0] != stack.shape[axis]:
        raise DimensionError(f"{name} has shape {factor.shape}, expected "
                             f"({stack.shape[axis]}, k)")
    return factor


def _u_problem(between, within, v, lam):
    return _assemble(between, within, v, lam, transpose=False)


def _v_problem(between, within, u, lam):
    return _assemble(between, within, u, lam, transpose=True)


def assemble_u_problem(stats, within, v, lam):
    """Problem in ``u = vec(U)`` for fixed ``V`` (order ``l1*k``).

    ``D = kron(V'V, I)``, ``M = sum_i g_i g_i'`` with ``g_i = vec(B_i V)``
    and ``N = sum_j w_j w_j' + lam*D`` with ``w_j = vec(W_j V)``, where
    ``B_i`` are the between-class and ``W_j`` the within-class deviations.
    """
    between = between_deviations(stats)
    within = np.asarray(within, dtype=np.float64)
    v = _check_factor(between, v, 2, "V")
    return _u_problem(between, within, v, float(lam))


def assemble_v_problem(stats, within, u, lam):
    """Problem in ``v = vec(V)`` for fixed ``U`` (order ``l2*k``); mirror of
    :func:`assemble_u_problem` using transposed deviations."""
    between = between_deviations(stats)
    within = np.asarray(within, dtype=np.float64)
    u = _check_factor(between, u, 1, "U")
    return _v_problem(between, within, u, float(lam))


def _objective_parts(u, v, between, within, lam):
    num = float(np.sum(kernels.bilinear_traces(between, u, v) ** 2))
    den = float(np.sum(kernels.bilinear_traces(within, u, v) ** 2))
    den += lam * float(np.sum((u.T @ u) * (v.T @ v)))
    return num, den


def objective_pair(pair, stats, within, lam):
    """Regularized trace ratio of one pair on the given statistics."""
    between = between_deviations(stats)
    within = np.asarray(within, dtype=np.float64)
    if pair.u.shape[0] != between.shape[1] or pair.v.shape[0] != between.shape[2]:
        raise DimensionError(f"pair U{pair.u.shape}, V{pair.v.shape} does not match "
                             f"data of shape {between.shape[1:]}")
    num, den = _objective_parts(pair.u, pair.v, between, within, float(lam))
    if not den > 0:
        raise IllPosedError(f"objective denominator is {den:.3g}")
    return num / den


def initial_v(l2, k, cfg, pair_index=0):
    if cfg.init == "random":
        rng = np.random.default_rng([int(cfg.seed), int(pair_index)])
        return rng.standard_normal((l2, k))
    v = np.zeros((l2, k))
    v[:k, :k] = float(cfg.init_scale) * np.eye(k)
    return v


def _require_pd(problem, lam):
    # with lam == 0 the denominator is the bare within-class scatter; refuse
    # to continue rather than let jitter hide a singular matrix
    if lam == 0:
        w = np.linalg.eigvalsh(problem.n)
        if w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny):
            raise IllPosedError("within-class scatter is singular; use lam > 0")


def _half_step(problem, rows, k, lam):
    """Solve one side; returns the new factor and the objective it attains,
    which is the Rayleigh quotient of the assembled problem at the solution."""
    _require_pd(problem, lam)
    q, _ = solve_largest_gen_eig(problem.m, problem.n)
    x = d_normalize(q, problem.d)
    num = float(x @ problem.m @ x)
    den = float(x @ problem.n @ x)
    if not den > 0:
        raise IllPosedError(f"objective denominator is {den:.3g}")
    f = num / den
    if not np.isfinite(f):
        raise NumericalFailureError(f"non-finite objective {f!r}")
    return unvec(x, rows, k), f


def fit_pair(stats, within, cfg, pair_index=0, callback=None):
    """Fit one projection pair by alternating u- and v-steps.

    Parameters
    ----------
    stats : ClassStats
        Statistics of the (already deflated) data.
    within : (n, l1, l2) array
        Within-class deviations of the same data.
    cfg : CrpConfig
    pair_index : int
        Only used to seed random initialization.
    callback : callable, optional
        Called as ``callback(iteration, side, U, V, objective)`` after every
        half-step, with ``side`` either ``"u"`` or ``"v"``.

    Returns
    -------
    pair : ProjectionPair
    trace : list of float
        Objective after each full iteration; non-decreasing.
    """
    between = between_deviations(stats)
    within = np.asarray(within, dtype=np.float64)
    l1, l2 = between.shape[1:]
    k = int(cfg.k)
    if k > min(l1, l2):
        raise DimensionError(f"rank k={k} exceeds min(l1, l2)={min(l1, l2)}")
    lam = float(cfg.lam)

    v = initial_v(l2, k, cfg, pair_index)
    trace = []
    previous = None
    for it in range(int(cfg.max_iter)):
        u, f_half = _half_step(_u_problem(between, within, v, lam), l1, k, lam)
        if callback is not None:
            callback(it, "u", u, v, f_half)
        if previous is None:
            previous = f_half
        v, f = _half_step(_v_problem(between, within, u, lam), l2, k, lam)
        if callback is not None:
            callback(it, "v", u, v, f)
        trace.append(f)
        change = abs(f - previous) / max(abs(previous), np.finfo(float).tiny)
        if change < cfg.tol:
            break
        previous = f
    else:
        logger.debug("pair %d stopped at max_iter=%d", pair_index, cfg.max_iter)
    return ProjectionPair(u, v), trace


def _check_constraint(pair):
    s = pair.constraint()
    if abs(s - 1.0) > CONSTRAINT_ATOL:
        raise PreconditionError(f"pair violates Tr(U'U V'V) = 1 (got {s:.9g})")


def deflate(d, pair):
    """Remove from every sample its component along ``vec(U V')``."""
    _check_constraint(pair)
    if d.shape != (pair.u.shape[0], pair.v.shape[0]):
        raise DimensionError(f"pair does not match data of shape {d.shape}")
    X, _ = kernels.deflate(d.X, pair.u, pair.v)
    return d.with_data(X)


def fit_crp(d, cfg, callback=None):
    """Fit ``h`` projection pairs, deflating the training data after each.

    ``callback``, if given, is called as ``callback(p, iteration, side, U, V,
    objective)``, i.e. :func:`fit_pair`'s callback prefixed with the pair
    index.
    """
    if d.n_classes < 2 or np.count_nonzero(d.counts()) < 2:
        raise ValueError("CRP needs at least two nonempty classes")
    h = cfg.resolved_h(d.n_classes)
    l1, l2 = d.shape
    if h >= l1 * l2:
        warnings.warn(f"h={h} >= l1*l2={l1 * l2}: deflation can exhaust the sample "
                      "space and later pairs may be degenerate", RuntimeWarning,
                      stacklevel=2)
    cfg = replace(cfg, h=h)
    scale = float(np.mean(np.sum(d.X ** 2, axis=(1, 2)))) if len(d) else 0.0
    current = d
    pairs, traces, degenerate = [], [], []
    for p in range(h):
        stats = compute_class_stats(current)
        within = within_deviations(current, stats)
        cb = None if callback is None else (lambda *a, _p=p: callback(_p, *a))
        pair, trace = fit_pair(stats, within, cfg, p, cb)
        num, _ = _objective_parts(pair.u, pair.v, between_deviations(stats), within, 0.0)
        flagged = num <= DEGENERATE_RTOL * scale
        if flagged:
            logger.info("pair %d is degenerate (numerator %.3g)", p, num)
        pairs.append(pair)
        traces.append(tuple(trace))
        degenerate.append(bool(flagged))
        current = deflate(current, pair)
    return CrpModel(tuple(pairs), cfg, tuple(traces), (l1, l2), tuple(degenerate))


def transform(model, X):
    """Embed a stack of matrices ``(n, l1, l2)`` into ``(n, h)`` features."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.shape[1:] != tuple(model.data_dims):
        raise DimensionError(f"inputs of shape {X.shape[1:]} do not match model "
                             f"dims {tuple(model.data_dims)}")
    out = np.empty((X.shape[0], model.h))
    for p, pair in enumerate(model.pairs):
        if model.config.replay:
            X, out[:, p] = kernels.deflate(X, pair.u, pair.v)
        else:
            out[:, p] = kernels.bilinear_traces(X, pair.u, pair.v)
    return out


def embed(model, x):
    """Feature vector of one matrix; feature ``p`` is taken after replaying
    the deflations by pairs ``1..p-1`` (unless replay is disabled)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {x.shape}")
    return transform(model, x[None])[0]


def embed_dataset(model, d):
    """``[(features, label), ...]`` in dataset order."""
    if len(d) == 0:
        return []
    F = transform(model, d.X)
    return [(F[j], int(d.y[j])) for j in range(len(d))]
