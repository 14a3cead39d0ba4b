"""Hot numeric loops: pool-adjacent-violators and the Lipschitz QP solver.

Each kernel exists twice, a numba version and a numpy/Python version, and the
public names are bound at import time according to :mod:`adp._accel`. Both
paths implement the same algorithm and must agree to rounding.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

__all__ = [
    "pava_rows",
    "pava_l1_rows",
    "lipschitz_pg",
    "weighted_median",
    "BACKEND",
]


# ---------------------------------------------------------------------------
# isotonic regression, squared loss, uniform weights (nondecreasing)
# ---------------------------------------------------------------------------

def _pava_rows_loop(Y):
    n, k = Y.shape
    out = np.empty_like(Y)
    sums = np.empty(k)
    cnts = np.empty(k, dtype=np.int64)
    for r in range(n):
        nb = 0
        for i in range(k):
            sums[nb] = Y[r, i]
            cnts[nb] = 1
            nb += 1
            while nb > 1 and sums[nb - 2] * cnts[nb - 1] > sums[nb - 1] * cnts[nb - 2]:
                sums[nb - 2] += sums[nb - 1]
                cnts[nb - 2] += cnts[nb - 1]
                nb -= 1
        pos = 0
        for b in range(nb):
            m = sums[b] / cnts[b]
            for _ in range(cnts[b]):
                out[r, pos] = m
                pos += 1
    return out


def _pava_rows_py(Y):
    out = np.empty_like(Y)
    for r, row in enumerate(Y.tolist()):
        sums = []
        cnts = []
        for y in row:
            s, c = y, 1
            while sums and sums[-1] * c > s * cnts[-1]:
                s += sums.pop()
                c += cnts.pop()
            sums.append(s)
            cnts.append(c)
        out[r] = np.repeat(np.array(sums) / np.array(cnts), cnts)
    return out


# ---------------------------------------------------------------------------
# isotonic regression, absolute loss: PAVA with weighted block medians
# ---------------------------------------------------------------------------

def _wmedian(z, w):
    """Weighted median; the midpoint when the half weight falls on a gap."""
    order = np.argsort(z, kind="mergesort")
    zs = z[order]
    cw = np.cumsum(w[order])
    half = 0.5 * cw[-1]
    for i in range(zs.shape[0]):
        if cw[i] >= half:
            if cw[i] == half and i + 1 < zs.shape[0]:
                return 0.5 * (zs[i] + zs[i + 1])
            return zs[i]
    return zs[-1]


_wmedian_py = _wmedian
weighted_median = _wmedian_py


def _pava_l1_rows_loop(Y, w):
    n, k = Y.shape
    out = np.empty_like(Y)
    starts = np.empty(k, dtype=np.int64)
    meds = np.empty(k)
    for r in range(n):
        row = Y[r]
        nb = 0
        for i in range(k):
            starts[nb] = i
            meds[nb] = row[i]
            nb += 1
            while nb > 1 and meds[nb - 2] > meds[nb - 1]:
                nb -= 1
                s = starts[nb - 1]
                meds[nb - 1] = _wmedian(row[s:i + 1], w[s:i + 1])
        for b in range(nb):
            end = k if b == nb - 1 else starts[b + 1]
            for p in range(starts[b], end):
                out[r, p] = meds[b]
    return out


def _pava_l1_rows_py(Y, w):
    out = np.empty_like(Y)
    for r in range(Y.shape[0]):
        row = Y[r]
        starts = []
        meds = []
        for i in range(row.shape[0]):
            starts.append(i)
            meds.append(row[i])
            while len(meds) > 1 and meds[-2] > meds[-1]:
                meds.pop()
                starts.pop()
                s = starts[-1]
                meds[-1] = float(_wmedian_py(row[s:i + 1], w[s:i + 1]))
        bounds = starts[1:] + [row.shape[0]]
        out[r] = np.repeat(meds, np.diff([starts[0]] + bounds))
    return out


# ---------------------------------------------------------------------------
# Lipschitz-bounded least squares
#
#   min ||A x - y||^2   s.t.  -L <= x[1:] <= L
#
# with A the cumulative-increment matrix (first column ones, column j has
# t_j - t_{j-1} from row j down). Inside the sweeps A x and A^T r are a cumsum
# and a reversed cumsum; A is only formed for the subspace solve.
# ---------------------------------------------------------------------------

def _pg_sweep(x, y, dt, L, alpha, n_steps):
    """``n_steps`` projected-gradient iterations with exact line search.

    Returns the updated point, the last Barzilai-Borwein step and the
    objective before and after the sweep.
    """
    k = y.shape[0]
    x = x.copy()
    h = np.empty(k)
    h[0] = x[0]
    h[1:] = x[0] + np.cumsum(dt * x[1:])
    r = h - y
    obj0 = np.dot(r, r)
    for _ in range(n_steps):
        g = np.empty(k)
        g[0] = np.sum(r)
        g[1:] = dt * np.cumsum(r[::-1])[::-1][1:]
        z = x - alpha * g
        z[1:] = np.minimum(np.maximum(z[1:], -L), L)
        d = z - x
        ad = np.empty(k)
        ad[0] = d[0]
        ad[1:] = d[0] + np.cumsum(dt * d[1:])
        curv = np.dot(ad, ad)
        if curv <= 0.0:
            break
        tau = -np.dot(g, d) / curv
        if tau > 1.0:
            tau = 1.0
        elif tau < 0.0:
            tau = 0.0
        x = x + tau * d
        r = r + tau * ad
        s2 = np.dot(d, d)
        if s2 > 0.0:
            alpha = s2 / curv
    return x, alpha, obj0, np.dot(r, r)


if HAS_NUMBA:
    _pava_rows_nb = njit(_pava_rows_loop)
    _wmedian = njit(_wmedian)  # the numba loop resolves this global at compile time
    _pava_l1_rows_nb = njit(_pava_l1_rows_loop)
    _pg_sweep_nb = njit(_pg_sweep)
else:
    _pava_rows_nb = _pava_l1_rows_nb = _pg_sweep_nb = None


def _as_rows(Y):
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        return Y[None, :], True
    return Y, False


def pava_rows(Y, backend=None):
    """Nondecreasing least-squares fit of every row of ``Y``."""
    Y, squeeze = _as_rows(Y)
    use_nb = HAS_NUMBA if backend is None else backend == "numba"
    out = _pava_rows_nb(Y) if use_nb else _pava_rows_py(Y)
    return out[0] if squeeze else out


def pava_l1_rows(Y, weights=None, backend=None):
    """Nondecreasing least-absolute-deviation fit of every row of ``Y``.

    ``weights`` (length ``k``, positive) default to uniform.
    """
    Y, squeeze = _as_rows(Y)
    w = np.ones(Y.shape[1]) if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    use_nb = HAS_NUMBA if backend is None else backend == "numba"
    out = _pava_l1_rows_nb(Y, w) if use_nb else _pava_l1_rows_py(Y, w)
    return out[0] if squeeze else out


def _cum_matrix(dt):
    k = dt.shape[0] + 1
    A = np.zeros((k, k))
    A[:, 0] = 1.0
    for j in range(1, k):
        A[j:, j] = dt[j - 1]
    return A


def _projected_gradient_norm(A, x, y, L):
    g = A.T @ (A @ x - y)
    z = x - g
    z[1:] = np.clip(z[1:], -L, L)
    return np.max(np.abs(z - x))


def lipschitz_pg(y, dt, L, max_iter=10_000, rtol=1e-12, sweep=8, backend=None):
    """Solve the Lipschitz-bounded least-squares QP.

    Alternates short projected-gradient sweeps (exact line search, BB steps)
    with an exact least-squares solve over the slopes that are not pinned at
    a bound, followed by a ratio test that keeps the iterate feasible. The
    sweeps fix the active set; the subspace solve removes the slow tail that
    plain projected gradient shows on this badly conditioned operator.

    Returns ``(x, iterations, scaled_projected_gradient_norm)``. ``x[0]`` is
    the fitted first value and ``x[1:]`` the segment slopes. ``iterations``
    counts gradient steps plus subspace solves.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    dt = np.ascontiguousarray(dt, dtype=np.float64)
    L = float(L)
    use_nb = HAS_NUMBA if backend is None else backend == "numba"
    sweep_fn = _pg_sweep_nb if use_nb else _pg_sweep
    k = y.shape[0]
    A = _cum_matrix(dt)
    scale = 1.0 + np.max(np.abs(y))

    x = np.empty(k)
    x[1:] = np.clip(np.diff(y) / dt, -L, L)
    x[0] = 0.0
    x[0] = np.mean(y - A @ x)
    alpha = 1.0 / np.sum(A * A)
    obj = float(np.sum((A @ x - y) ** 2))
    it = 0
    pg = _projected_gradient_norm(A, x, y, L) / scale
    while it < max_iter and pg > 1e-13:
        x, alpha, _, swept = sweep_fn(x, y, dt, L, alpha, sweep)
        it += sweep
        # slopes pinned at a bound with the gradient pushing outward stay fixed
        g = A.T @ (A @ x - y)
        at_lo = (x[1:] <= -L) & (g[1:] > 0)
        at_hi = (x[1:] >= L) & (g[1:] < 0)
        free = np.ones(k, dtype=bool)
        free[1:] = ~(at_lo | at_hi)
        fixed = ~free
        rhs = y - A[:, fixed] @ x[fixed]
        sol, *_ = np.linalg.lstsq(A[:, free], rhs, rcond=None)
        d = np.zeros(k)
        d[free] = sol - x[free]
        # projected backtracking along the subspace direction
        tau = 1.0
        while tau > 1e-12:
            cand = x + tau * d
            cand[1:] = np.clip(cand[1:], -L, L)
            if np.sum((A @ cand - y) ** 2) < swept:
                x = cand
                break
            tau *= 0.5
        it += 1
        new_obj = float(np.sum((A @ x - y) ** 2))
        pg = _projected_gradient_norm(A, x, y, L) / scale
        if obj - new_obj <= rtol * max(obj, 1e-300) and pg <= 1e-8:
            obj = new_obj
            break
        obj = new_obj
    return x, it, pg


BACKEND = "numba" if HAS_NUMBA else "numpy"
