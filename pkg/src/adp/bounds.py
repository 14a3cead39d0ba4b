"""Realistic plot intervals along a line ``x0 + t v``.

Two constraints are supported: the per-feature data box, and a fitted
Gaussian density level set (squared Mahalanobis distance below a training
quantile). The plot interval is their intersection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Direction, Interval, as_instance
from .errors import DegenerateInterval, DimensionMismatch, EmptyInterval, TargetOutsideDensity

MIN_WIDTH = 1e-9


def _dense(v, dim=None) -> np.ndarray:
    if isinstance(v, Direction):
        return v.to_dense()
    arr = np.asarray(v, dtype=np.float64)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"direction has length {arr.shape[0]}, expected {dim}")
    return arr


def _checked(a: float, b: float) -> Interval:
    if not (b - a >= MIN_WIDTH):
        raise DegenerateInterval(f"plot interval [{a}, {b}] is narrower than {MIN_WIDTH}")
    return Interval(float(a), float(b))


@dataclass(frozen=True)
class BoxBound:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if self.mins.shape != self.maxs.shape or np.any(self.mins > self.maxs):
            raise ValueError("box needs mins <= maxs of equal shape")

    @classmethod
    def from_dataset(cls, data: Dataset) -> "BoxBound":
        return cls(np.asarray(data.mins, dtype=np.float64), np.asarray(data.maxs, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.mins.shape[0]

    def contains(self, x) -> bool:
        return bool(np.all(x >= self.mins) and np.all(x <= self.maxs))


def _box_limits(x0, v, box):
    """Raw (lo, hi) of the box interval, no width check."""
    if not box.contains(x0):
        raise EmptyInterval("target lies outside the data box")
    nz = v != 0.0
    if not np.any(nz):
        return -math.inf, math.inf
    with np.errstate(over="ignore"):  # subnormal weights give +-inf, which is fine
        lo_t = (box.mins[nz] - x0[nz]) / v[nz]
        hi_t = (box.maxs[nz] - x0[nz]) / v[nz]
    a = float(np.max(np.minimum(lo_t, hi_t)))
    b = float(np.min(np.maximum(lo_t, hi_t)))
    return a, b


def line_box_interval(x0, v, box: BoxBound) -> Interval:
    """Largest ``[a, b]`` with ``x0 + t v`` inside the box for every ``t``."""
    x0 = as_instance(x0, box.dim)
    v = _dense(v, box.dim)
    a, b = _box_limits(x0, v, box)
    return _checked(a, b)


@dataclass(frozen=True)
class GaussianDensity:
    """Gaussian level set ``(x - mean)^T P (x - mean) <= threshold``.

    ``threshold`` is a squared Mahalanobis distance; :meth:`fit` sets it to a
    quantile of the training distances.
    """

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    threshold: float
    quantile: float | None = None
    ridge: float = 0.0

    @classmethod
    def fit(cls, data, quantile: float = 0.95, ridge: float | None = None) -> "GaussianDensity":
        rows = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
        if not 0.0 < quantile < 1.0:
            raise ValueError(f"quantile must lie in (0, 1), got {quantile}")
        n, d = rows.shape
        mean = rows.mean(axis=0)
        if n > 1:
            cov = np.atleast_2d(np.cov(rows, rowvar=False))
        else:
            cov = np.zeros((d, d))
        if ridge is None:
            tr = float(np.trace(cov))
            ridge = 1e-6 * (tr / d if tr > 0 else 1.0)
        cov = cov + ridge * np.eye(d)
        prec = np.linalg.inv(cov)
        diff = rows - mean
        m2 = np.einsum("ni,ij,nj->n", diff, prec, diff)
        return cls(mean, cov, prec, float(np.quantile(m2, quantile)), quantile, ridge)

    @classmethod
    def from_threshold(cls, mean, covariance, threshold: float) -> "GaussianDensity":
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(covariance, dtype=np.float64)
        return cls(mean, cov, np.linalg.inv(cov), float(threshold))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def mahalanobis2(self, x) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.mean
        out = np.einsum("ni,ij,nj->n", diff, self.precision, diff)
        return out if np.ndim(x) > 1 else out[0]


def _density_limits(x0, v, g):
    diff = x0 - g.mean
    Pv = g.precision @ v
    alpha = float(v @ Pv)
    beta = 2.0 * float(diff @ Pv)
    gamma = float(diff @ g.precision @ diff) - g.threshold
    if gamma > 1e-12 * max(1.0, g.threshold):
        raise TargetOutsideDensity(
            f"target has squared Mahalanobis distance {gamma + g.threshold:.6g} "
            f"> threshold {g.threshold:.6g}")
    gamma = min(gamma, 0.0)
    if alpha <= 0.0:
        return -math.inf, math.inf
    disc = math.sqrt(max(beta * beta - 4.0 * alpha * gamma, 0.0))
    # numerically stable pair of roots
    q = -0.5 * (beta + math.copysign(disc, beta))
    if q == 0.0:
        return 0.0, 0.0
    r1, r2 = q / alpha, gamma / q
    return min(r1, r2), max(r1, r2)


def line_density_interval(x0, v, g: GaussianDensity) -> Interval:
    """Portion of the line inside the density level set."""
    x0 = as_instance(x0, g.dim)
    v = _dense(v, g.dim)
    a, b = _density_limits(x0, v, g)
    return _checked(a, b)


def plot_interval(x0, v, box: BoxBound | None, density: GaussianDensity | None = None) -> Interval:
    """Intersection of the box interval and, when given, the density interval."""
    if box is None and density is None:
        raise ValueError("plot_interval needs a box, a density or both")
    dim = box.dim if box is not None else density.dim
    x0 = as_instance(x0, dim)
    v = _dense(v, dim)
    a, b = -math.inf, math.inf
    if box is not None:
        a, b = _box_limits(x0, v, box)
    if density is not None:
        da, db = _density_limits(x0, v, density)
        a, b = max(a, da), min(b, db)
    if a > b:
        raise EmptyInterval(f"box and density intervals do not overlap ([{a}, {b}])")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DegenerateInterval("unbounded plot interval; the direction is zero")
    return _checked(a, b)


def pooled_interval(rows, v, box: BoxBound | None, density: GaussianDensity | None = None) -> Interval:
    """Intersection of the per-row intervals, for global (averaged) plots."""
    a, b = -math.inf, math.inf
    for x in np.atleast_2d(rows):
        iv = plot_interval(x, v, box, density)
        a, b = max(a, iv.a), min(b, iv.b)
    if a > b:
        raise EmptyInterval("per-instance intervals have no common part")
    return _checked(a, b)
