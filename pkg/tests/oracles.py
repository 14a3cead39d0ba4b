"""Independent reference solvers used only by the tests."""
import itertools

import numpy as np
from scipy.optimize import linprog, lsq_linear


def trap_loss(fs, hs, loss="squared"):
    r = np.asarray(fs, float) - np.asarray(hs, float)
    p = r * r if loss == "squared" else np.abs(r)
    w = np.ones(len(p))
    w[0] = w[-1] = 0.5
    return float(p @ w / (len(p) - 1))


def isotonic_bruteforce(y):
    """Nondecreasing least squares by enumerating every contiguous partition."""
    y = np.asarray(y, float)
    k = len(y)
    best, best_h = np.inf, None
    for cuts in itertools.product([0, 1], repeat=k - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [k]
        means = [y[a:b].mean() for a, b in zip(bounds, bounds[1:])]
        if any(m2 < m1 - 1e-15 for m1, m2 in zip(means, means[1:])):
            continue
        h = np.concatenate([np.full(b - a, m) for m, a, b in zip(means, bounds, bounds[1:])])
        sse = float(((y - h) ** 2).sum())
        if sse < best - 1e-14:
            best, best_h = sse, h
    return best_h


def _increment_design(ts):
    k = len(ts)
    A = np.zeros((k, k))
    A[:, 0] = 1.0
    dt = np.diff(ts)
    for j in range(1, k):
        A[j:, j] = dt[j - 1]
    return A


def isotonic_bvls(y):
    """Nondecreasing least squares as bounded least squares on increments."""
    y = np.asarray(y, float)
    k = len(y)
    A = _increment_design(np.arange(k, dtype=float))
    lo = np.r_[-np.inf, np.zeros(k - 1)]
    res = lsq_linear(A, y, bounds=(lo, np.full(k, np.inf)), method="bvls", tol=1e-14)
    return A @ res.x


def lipschitz_bvls(y, ts, L):
    A = _increment_design(np.asarray(ts, float))
    k = len(y)
    lo = np.r_[-np.inf, np.full(k - 1, -L)]
    hi = np.r_[np.inf, np.full(k - 1, L)]
    res = lsq_linear(A, np.asarray(y, float), bounds=(lo, hi), method="bvls", tol=1e-15)
    return A @ res.x


def trap_weights(k):
    w = np.ones(k)
    w[0] = w[-1] = 0.5
    return w


def isotonic_l1_lp(y, w=None):
    """Minimum sum w |y - h| over nondecreasing h, via a linear program."""
    y = np.asarray(y, float)
    k = len(y)
    w = np.ones(k) if w is None else np.asarray(w, float)
    # variables: h (k), e (k); minimize sum w e with e >= |y - h|
    c = np.r_[np.zeros(k), w]
    I = np.eye(k)
    A_ub = [np.hstack([-I, -I]), np.hstack([I, -I])]
    b_ub = [-y, y]
    D = np.zeros((k - 1, 2 * k))
    for i in range(k - 1):
        D[i, i], D[i, i + 1] = 1.0, -1.0
    A_ub.append(D)
    b_ub.append(np.zeros(k - 1))
    res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub),
                  bounds=[(None, None)] * k + [(0, None)] * k, method="highs")
    return float(res.fun)


def lad_line_lp(ts, y, w=None):
    """Minimum sum w |y - a - b t| via a linear program."""
    ts = np.asarray(ts, float)
    y = np.asarray(y, float)
    k = len(y)
    w = np.ones(k) if w is None else np.asarray(w, float)
    X = np.column_stack([np.ones(k), ts])
    c = np.r_[0.0, 0.0, w]
    I = np.eye(k)
    A_ub = np.vstack([np.hstack([-X, -I]), np.hstack([X, -I])])
    b_ub = np.r_[-y, y]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub,
                  bounds=[(None, None)] * 2 + [(0, None)] * k, method="highs")
    return float(res.fun)


def monotone_best(y, loss="squared"):
    """Oracle version of the two-orientation monotone fit; ties go increasing."""
    inc = isotonic_bruteforce(y)
    dec = -isotonic_bruteforce(-np.asarray(y, float))
    li, ld = trap_loss(y, inc, loss), trap_loss(y, dec, loss)
    return (dec, ld, li) if ld < li else (inc, li, ld)
