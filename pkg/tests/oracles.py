"""Independent reference computations used by several test modules."""
import numpy as np


def trace_objective(u, v, between, within, lam):
    """CRP objective by explicit per-sample traces."""
    num = sum(np.trace(u.T @ b @ v) ** 2 for b in between)
    den = sum(np.trace(u.T @ w @ v) ** 2 for w in within)
    den += lam * np.trace(u.T @ u @ v.T @ v)
    return num / den


def grid_max_rank1(between, within, lam, steps=721, refine=3):
    """Maximum of the 2x2, k=1 objective over u = (cos a, sin a),
    v = (cos b, sin b); the objective is invariant to rescaling u and v
    separately, so these half-circles cover the constraint set. A coarse
    grid is followed by a few rounds of local re-gridding around the best
    cell."""
    between = np.asarray(between)
    within = np.asarray(within)

    def evaluate(a, b):
        U = np.stack([np.cos(a), np.sin(a)], axis=1)
        V = np.stack([np.cos(b), np.sin(b)], axis=1)
        tb = np.einsum("ta,iab,pb->itp", U, between, V)
        tw = np.einsum("ta,jab,pb->jtp", U, within, V)
        return (tb ** 2).sum(0) / ((tw ** 2).sum(0) + lam)

    a = np.linspace(0, np.pi, steps, endpoint=False)
    b = np.linspace(0, np.pi, steps, endpoint=False)
    width = np.pi / steps
    best = -np.inf
    for _ in range(refine + 1):
        f = evaluate(a, b)
        i, j = np.unravel_index(np.argmax(f), f.shape)
        best = max(best, f[i, j])
        a = np.linspace(a[i] - 2 * width, a[i] + 2 * width, 81)
        b = np.linspace(b[j] - 2 * width, b[j] + 2 * width, 81)
        width = 4 * width / 80
    return float(best)


def vectorized_trace_ratio(between, within, lam):
    """max over w of w'Sb w / (w'Sw w + lam w'w) on column-stacked data."""
    gb = np.stack([b.ravel(order="F") for b in between])
    gw = np.stack([w.ravel(order="F") for w in within])
    sb, sw = gb.T @ gb, gw.T @ gw + lam * np.eye(gb.shape[1])
    vals = np.linalg.eigvals(np.linalg.solve(sw, sb))
    return float(np.max(vals.real))
