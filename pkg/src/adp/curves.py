"""Sampling the univariate plot function for every plot family.

The four public ``*_curve`` functions follow the plot definitions one to one.
:class:`PlotProblem` bundles a model, a target, a space and bounds so the
optimizer can map a direction to a curve (and many directions to many
curves in one model call).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import BoxBound, GaussianDensity, plot_interval, pooled_interval
from .core import Direction, Interval, SampledCurve, as_instance, grid
from .errors import ADPError, DimensionMismatch, ParameterOutOfRange
from .models import ModelHandle
from .spaces import LATENT_BOUND, GenerativeMap, TransformPipeline

FAMILIES = ("instance", "pdp", "latent", "transform")


def _dense(v, dim):
    if isinstance(v, Direction):
        if v.dim != dim:
            raise DimensionMismatch(f"direction has dim {v.dim}, expected {dim}")
        return v.to_dense()
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (dim,):
        raise DimensionMismatch(f"direction has shape {arr.shape}, expected ({dim},)")
    return arr


def instance_curve(m: ModelHandle, x0, v, interval: Interval, k: int) -> SampledCurve:
    """``t -> f(x0 + t v)`` on ``k`` grid points (one model call)."""
    x0 = as_instance(x0, m.dim)
    ts = grid(interval, k)
    X = x0 + ts[:, None] * _dense(v, m.dim)
    return SampledCurve(ts, m.evaluate_batch(X), interval)


def pdp_curve(m: ModelHandle, data, v, interval: Interval, k: int) -> SampledCurve:
    """``t -> mean_x f(x + t v)`` over the rows of ``data``."""
    rows = np.atleast_2d(np.asarray(getattr(data, "rows", data), dtype=np.float64))
    if rows.shape[0] == 0:
        raise ValueError("pdp_curve needs at least one instance")
    ts = grid(interval, k)
    vd = _dense(v, m.dim)
    X = (rows[None, :, :] + ts[:, None, None] * vd).reshape(-1, m.dim)
    fs = m.evaluate_batch(X).reshape(ts.shape[0], rows.shape[0]).mean(axis=1)
    return SampledCurve(ts, fs, interval)


def latent_curve(m: ModelHandle, G: GenerativeMap, x0, v, interval: Interval, k: int) -> SampledCurve:
    """``t -> f(decode(encode(x0) + t v))`` for a latent direction ``v``."""
    x0 = as_instance(x0, m.dim)
    z0 = G.encode(x0[None, :])[0]
    ts = grid(interval, k)
    X = G.decode(z0 + ts[:, None] * _dense(v, G.latent_dim))
    return SampledCurve(ts, m.evaluate_batch(X), interval)


def transform_curve(m: ModelHandle, p: TransformPipeline, x0, v, k: int) -> SampledCurve:
    """``t -> f(Lambda_{x0}(v t))`` for ``t`` in ``[0, 1]``."""
    x0 = as_instance(x0, m.dim)
    vv = _dense(v, p.length)
    if np.any(vv < 0.0) or np.any(vv > 1.0):
        raise ParameterOutOfRange("transform direction must lie in the unit cube")
    interval = Interval(0.0, 1.0)
    ts = grid(interval, k)
    X = p.apply(x0, ts[:, None] * vv)
    return SampledCurve(ts, m.evaluate_batch(X), interval)


@dataclass
class CurveSample:
    """A sampled curve plus the input points it was evaluated at."""

    direction: Direction
    curve: SampledCurve
    points: np.ndarray
    contrast: SampledCurve | None = None


class PlotProblem:
    """Map directions to plot curves for one model, target and space.

    Parameters
    ----------
    model
        The audited model.
    x0
        Target instance (ignored by the ``"pdp"`` family).
    family
        ``"instance"``, ``"pdp"``, ``"latent"`` or ``"transform"``.
    box, density
        Raw-space bounds for the instance and pdp families.
    data
        Rows averaged over by the pdp family.
    generative
        :class:`GenerativeMap` of the latent family.
    pipeline
        :class:`TransformPipeline` of the transform family; unit directions
        are mapped into the parameter cube by clipping negative weights to 0.
    k
        Grid size (bumped to odd when the interval straddles 0).
    latent_bound
        Latent plots use ``t in [-latent_bound, latent_bound]``.
    """

    def __init__(self, model: ModelHandle, x0=None, *, family: str = "instance",
                 box: BoxBound | None = None, density: GaussianDensity | None = None,
                 data=None, generative: GenerativeMap | None = None,
                 pipeline: TransformPipeline | None = None, k: int = 50,
                 latent_bound: float = LATENT_BOUND):
        if family not in FAMILIES:
            raise ValueError(f"unknown plot family {family!r}")
        self.model = model
        self.family = family
        self.box = box
        self.density = density
        self.k = int(k)
        self.latent_bound = float(latent_bound)
        self.generative = generative
        self.pipeline = pipeline
        self.x0 = None if x0 is None else as_instance(x0, model.dim)
        self.data = None
        if family == "pdp":
            if data is None:
                raise ValueError("the pdp family needs data")
            self.data = np.atleast_2d(np.asarray(getattr(data, "rows", data), dtype=np.float64))
        elif self.x0 is None:
            raise ValueError(f"the {family} family needs a target x0")
        if family in ("instance", "pdp") and box is None and density is None:
            raise ValueError("raw-space plots need a box, a density or both")
        if family == "latent":
            if generative is None:
                raise ValueError("the latent family needs a generative map")
            self._z0 = generative.encode(self.x0[None, :])[0]
        if family == "transform" and pipeline is None:
            raise ValueError("the transform family needs a pipeline")

    @property
    def dim(self) -> int:
        if self.family == "latent":
            return self.generative.latent_dim
        if self.family == "transform":
            return self.pipeline.length
        return self.model.dim

    def with_target(self, x0) -> "PlotProblem":
        return PlotProblem(self.model, x0, family=self.family, box=self.box,
                           density=self.density, data=self.data, generative=self.generative,
                           pipeline=self.pipeline, k=self.k, latent_bound=self.latent_bound)

    def interval(self, v: Direction) -> Interval:
        if self.family == "instance":
            return plot_interval(self.x0, v, self.box, self.density)
        if self.family == "pdp":
            return pooled_interval(self.data, v, self.box, self.density)
        if self.family == "latent":
            return Interval(-self.latent_bound, self.latent_bound)
        return Interval(0.0, 1.0)

    def transform_params(self, v: Direction) -> np.ndarray:
        return np.clip(_dense(v, self.dim), 0.0, 1.0)

    def points(self, v: Direction, interval: Interval):
        """Grid and the model inputs for direction ``v``; pdp rows are stacked per t."""
        ts = grid(interval, self.k)
        if self.family == "instance":
            X = self.x0 + ts[:, None] * _dense(v, self.dim)
        elif self.family == "pdp":
            X = (self.data[None, :, :] + ts[:, None, None] * _dense(v, self.dim)).reshape(-1, self.dim)
        elif self.family == "latent":
            X = self.generative.decode(self._z0 + ts[:, None] * _dense(v, self.dim))
        else:
            X = self.pipeline.apply(self.x0, ts[:, None] * self.transform_params(v))
        return ts, X

    def _reduce(self, values, k):
        if self.family == "pdp":
            return values.reshape(k, self.data.shape[0]).mean(axis=1)
        return values

    def sample(self, v: Direction, contrast: ModelHandle | None = None) -> CurveSample:
        iv = self.interval(v)
        ts, X = self.points(v, iv)
        fs = self._reduce(self.model.evaluate_batch(X), ts.shape[0])
        gcurve = None
        if contrast is not None:
            gcurve = SampledCurve(ts, self._reduce(contrast.evaluate_batch(X), ts.shape[0]), iv)
        return CurveSample(v, SampledCurve(ts, fs, iv), X, gcurve)

    def sample_many(self, directions, contrast: ModelHandle | None = None):
        """Sample every direction with a single model call.

        Returns a list aligned with ``directions``; entries whose interval
        could not be formed hold the raised :class:`ADPError` instead.
        """
        out = [None] * len(directions)
        chunks = []
        for idx, v in enumerate(directions):
            try:
                iv = self.interval(v)
            except ADPError as exc:
                out[idx] = exc
                continue
            ts, X = self.points(v, iv)
            chunks.append((idx, v, iv, ts, X))
        if not chunks:
            return out
        allX = np.concatenate([c[4] for c in chunks], axis=0)
        fvals = self.model.evaluate_batch(allX)
        gvals = contrast.evaluate_batch(allX) if contrast is not None else None
        pos = 0
        for idx, v, iv, ts, X in chunks:
            n = X.shape[0]
            fs = self._reduce(fvals[pos:pos + n], ts.shape[0])
            gcurve = None
            if gvals is not None:
                gcurve = SampledCurve(ts, self._reduce(gvals[pos:pos + n], ts.shape[0]), iv)
            out[idx] = CurveSample(v, SampledCurve(ts, fs, iv), X, gcurve)
            pos += n
        return out
