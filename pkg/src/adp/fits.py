"""Reference regressions on a sampled curve.

Each fit returns the best member of a function class on the curve's grid
together with its discretized loss. Squared-loss fits use uniform weights;
absolute-loss fits use the trapezoid weights of the loss itself, because
uniform L1 minimizers are not unique and their reported loss would depend on
which one the solver lands on. Row-batched variants
(``*_rows``) fit many equal-length curves at once for the optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import LOSSES, Interval, SampledCurve
from .errors import LengthMismatch, NonConvergence, UnsupportedCombination


_UNIT = Interval(0.0, 1.0)


def trapezoid_weights(k: int) -> np.ndarray:
    w = np.ones(k)
    w[0] = w[-1] = 0.5
    return w


def discrete_loss(fs, hs, ts, loss: str = "squared", normalize: bool = True) -> float:
    """Trapezoid integral of the pointwise loss, divided by ``b - a`` if ``normalize``."""
    fs = np.asarray(fs, dtype=np.float64)
    hs = np.asarray(hs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    if not (fs.shape == hs.shape == ts.shape):
        raise LengthMismatch(f"lengths differ: fs {fs.shape}, hs {hs.shape}, ts {ts.shape}")
    r = fs - hs
    if loss == "squared":
        pointwise = r * r
    elif loss == "absolute":
        pointwise = np.abs(r)
    else:
        raise UnsupportedCombination(f"unknown loss {loss!r}")
    total = float(np.trapezoid(pointwise, ts))
    return total / (ts[-1] - ts[0]) if normalize else total


def loss_rows(Fs, Hs, lengths, loss: str = "squared", normalize: bool = True) -> np.ndarray:
    """Row-wise :func:`discrete_loss` on equally spaced grids.

    On a uniform grid the normalized trapezoid integral is a weighted mean
    independent of the interval, so only ``lengths`` (``b - a`` per row) is
    needed, and only when ``normalize`` is off.
    """
    R = Fs - Hs
    P = R * R if loss == "squared" else np.abs(R)
    k = Fs.shape[1]
    out = P @ trapezoid_weights(k) / (k - 1)
    if not normalize:
        out = out * np.asarray(lengths, dtype=np.float64)
    return out


@dataclass(frozen=True)
class ReferenceFit:
    hs: np.ndarray
    fit_kind: str
    achieved_loss: float
    info: dict = None


def _fit(curve, hs, kind, loss, normalize, info=None):
    return ReferenceFit(hs, kind, discrete_loss(curve.fs, hs, curve.ts, loss, normalize), info or {})


def fit_constant_mean(curve: SampledCurve, loss: str = "squared", normalize: bool = True) -> ReferenceFit:
    """Constant at the trapezoid-weighted mean of the curve over its interval."""
    c = float(np.trapezoid(curve.fs, curve.ts)) / (curve.ts[-1] - curve.ts[0])
    return _fit(curve, np.full(curve.k, c), "constant_mean", loss, normalize, {"value": c})


def fit_constant_value(curve: SampledCurve, value: float, loss: str = "squared",
                       normalize: bool = True) -> ReferenceFit:
    return _fit(curve, np.full(curve.k, float(value)), "constant_value", loss, normalize,
                {"value": float(value)})


def _ols_line(ts, fs):
    tm = ts.mean()
    dt = ts - tm
    slope = float(dt @ (fs - fs.mean()) / (dt @ dt))
    return fs.mean() - slope * tm, slope


def _lad_objective(ts, fs, w, slope):
    z = fs - slope * ts
    a = kernels.weighted_median(z, w)
    return float(w @ np.abs(z - a)), a


def _lad_line(ts, fs, w):
    """Exact weighted least-absolute-deviations line.

    ``F(b) = min_a sum w |f - a - b t|`` is convex and piecewise linear in the
    slope with kinks at the slopes through pairs of points, so a binary search
    over those slopes finds the minimum.
    """
    i, j = np.triu_indices(ts.shape[0], 1)
    slopes = np.unique((fs[j] - fs[i]) / (ts[j] - ts[i]))
    lo, hi = 0, slopes.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _lad_objective(ts, fs, w, slopes[mid])[0] <= _lad_objective(ts, fs, w, slopes[mid + 1])[0]:
            hi = mid
        else:
            lo = mid + 1
    b = float(slopes[lo])
    return float(_lad_objective(ts, fs, w, b)[1]), b


def fit_linear(curve: SampledCurve, loss: str = "squared", normalize: bool = True) -> ReferenceFit:
    """Least-squares line, or the exact trapezoid-weighted LAD line for absolute loss."""
    if loss == "squared":
        b0, b1 = _ols_line(curve.ts, curve.fs)
    elif loss == "absolute":
        b0, b1 = _lad_line(curve.ts, curve.fs, trapezoid_weights(curve.k))
    else:
        raise UnsupportedCombination(f"unknown loss {loss!r}")
    return _fit(curve, b0 + b1 * curve.ts, "linear", loss, normalize,
                {"intercept": b0, "slope": b1})


def _isotonic_pair(Fs, loss):
    if loss == "squared":
        inc = kernels.pava_rows(Fs)
        dec = -kernels.pava_rows(-Fs)
    elif loss == "absolute":
        # weighted like the reported loss so the minimum value is unique
        w = trapezoid_weights(Fs.shape[1])
        inc = kernels.pava_l1_rows(Fs, w)
        dec = -kernels.pava_l1_rows(-Fs, w)
    else:
        raise UnsupportedCombination(f"unknown loss {loss!r}")
    return inc, dec


def fit_isotonic(curve: SampledCurve, loss: str = "squared", normalize: bool = True) -> ReferenceFit:
    """Best monotone fit: the better of the nondecreasing and nonincreasing fits.

    Ties go to the nondecreasing fit.
    """
    inc, dec = _isotonic_pair(curve.fs[None, :], loss)
    li = discrete_loss(curve.fs, inc[0], curve.ts, loss, normalize)
    ld = discrete_loss(curve.fs, dec[0], curve.ts, loss, normalize)
    if ld < li:
        return ReferenceFit(dec[0], "isotonic", ld, {"orientation": "decreasing"})
    return ReferenceFit(inc[0], "isotonic", li, {"orientation": "increasing"})


def _lipschitz_hs(fs, ts, L):
    dt = np.diff(ts)
    if np.all(np.abs(np.diff(fs)) <= L * dt):
        return fs.copy(), 0
    x, iters, pg = kernels.lipschitz_pg(fs, dt, L)
    if pg > 1e-6:
        raise NonConvergence(
            f"Lipschitz fit did not converge in {iters} iterations", grad_norm=float(pg))
    hs = np.empty_like(fs)
    hs[0] = x[0]
    hs[1:] = x[0] + np.cumsum(dt * x[1:])
    return hs, iters


def fit_lipschitz(curve: SampledCurve, L: float, loss: str = "squared",
                  normalize: bool = True) -> ReferenceFit:
    """Closest curve (least squares) whose slopes all lie in ``[-L, L]``."""
    if loss != "squared":
        raise UnsupportedCombination("the Lipschitz fit is defined for squared loss only")
    if not L > 0:
        raise UnsupportedCombination(f"Lipschitz constant must be positive, got {L}")
    hs, iters = _lipschitz_hs(curve.fs, curve.ts, float(L))
    return _fit(curve, hs, f"lipschitz({L:g})", loss, normalize, {"L": float(L), "iterations": iters})


def fit_curve(curve: SampledCurve, fit_kind: str, loss: str = "squared", params=None,
              normalize: bool = True) -> ReferenceFit:
    params = dict(params or {})
    if loss not in LOSSES:
        raise UnsupportedCombination(f"unknown loss {loss!r}")
    if fit_kind == "linear":
        return fit_linear(curve, loss, normalize)
    if fit_kind == "isotonic":
        return fit_isotonic(curve, loss, normalize)
    if fit_kind == "lipschitz":
        if "L" not in params:
            raise UnsupportedCombination("lipschitz fit needs params['L']")
        return fit_lipschitz(curve, params["L"], loss, normalize)
    if fit_kind == "constant_mean":
        return fit_constant_mean(curve, loss, normalize)
    if fit_kind == "constant_value":
        return fit_constant_value(curve, params["value"], loss, normalize)
    raise UnsupportedCombination(f"unknown fit kind {fit_kind!r}")


# ---------------------------------------------------------------------------
# batched fits over equal-length, equally spaced curves
# ---------------------------------------------------------------------------

def fit_rows(Fs, lengths, fit_kind: str, loss: str = "squared", params=None,
             normalize: bool = True) -> np.ndarray:
    """Fitted values for every row of ``Fs``; the grids differ only in ``lengths``."""
    Fs = np.asarray(Fs, dtype=np.float64)
    n, k = Fs.shape
    params = dict(params or {})
    if fit_kind == "constant_mean":
        w = trapezoid_weights(k) / (k - 1)
        return np.repeat((Fs @ w)[:, None], k, axis=1)
    if fit_kind == "linear":
        if loss == "squared":
            # OLS on a uniform grid is affine-invariant in t, so use indices
            u = np.arange(k) - (k - 1) / 2.0
            slope = (Fs - Fs.mean(axis=1, keepdims=True)) @ u / (u @ u)
            return Fs.mean(axis=1, keepdims=True) + slope[:, None] * u
        ts = np.linspace(0.0, 1.0, k)
        return np.vstack([fit_linear(SampledCurve(ts, f, _UNIT), loss).hs for f in Fs])
    if fit_kind == "isotonic":
        inc, dec = _isotonic_pair(Fs, loss)
        li = loss_rows(Fs, inc, lengths, loss, normalize)
        ld = loss_rows(Fs, dec, lengths, loss, normalize)
        return np.where((ld < li)[:, None], dec, inc)
    if fit_kind == "lipschitz":
        if loss != "squared":
            raise UnsupportedCombination("the Lipschitz fit is defined for squared loss only")
        L = float(params["L"])
        out = np.empty_like(Fs)
        for r in range(n):
            ts = np.linspace(0.0, float(lengths[r]), k)
            out[r] = _lipschitz_hs(Fs[r], ts, L)[0]
        return out
    raise UnsupportedCombination(f"unknown fit kind {fit_kind!r}")
