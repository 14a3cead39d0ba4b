"""Shared domain types and direction algebra."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EqualIndices,
    IndexOutOfRange,
    UnsupportedCombination,
    ZeroVector,
)

ZERO_TOL = 1e-10

LOSSES = ("squared", "absolute")


def as_instance(x, dim=None) -> np.ndarray:
    """Coerce ``x`` to a 1-D float array, checking its length if ``dim`` is given."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"instance must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"instance has length {arr.shape[0]}, expected {dim}")
    return arr


@dataclass(frozen=True)
class Dataset:
    rows: np.ndarray
    feature_names: tuple
    mins: np.ndarray = field(repr=False)
    maxs: np.ndarray = field(repr=False)

    @classmethod
    def from_rows(cls, rows, feature_names: Sequence[str] | None = None) -> "Dataset":
        rows = np.array(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DimensionMismatch(f"dataset needs shape (n>=1, d>=1), got {rows.shape}")
        d = rows.shape[1]
        if feature_names is None:
            feature_names = [f"x{j}" for j in range(d)]
        if len(feature_names) != d:
            raise DimensionMismatch(f"{len(feature_names)} names for {d} columns")
        rows.setflags(write=False)
        mins = rows.min(axis=0)
        maxs = rows.max(axis=0)
        mins.setflags(write=False)
        maxs.setflags(write=False)
        return cls(rows, tuple(feature_names), mins, maxs)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class Direction:
    """Sparse unit vector. ``entries`` is a sorted tuple of (index, weight)."""

    entries: tuple
    dim: int

    @property
    def support(self) -> tuple:
        return tuple(i for i, _ in self.entries)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def to_dense(self) -> np.ndarray:
        v = np.zeros(self.dim)
        for i, w in self.entries:
            v[i] = w
        return v

    def __neg__(self) -> "Direction":
        return Direction(tuple((i, -w) for i, w in self.entries), self.dim)

    @classmethod
    def axis(cls, i: int, dim: int) -> "Direction":
        if not 0 <= i < dim:
            raise IndexOutOfRange(f"axis {i} outside [0, {dim})")
        return cls(((i, 1.0),), dim)


def _normalize_entries(items, dim, zero_tol):
    for _ in range(2):
        norm = math.sqrt(sum(w * w for _, w in items))
        if norm == 0.0 or not math.isfinite(norm):
            raise ZeroVector("direction has no nonzero weight")
        scaled = [(i, w / norm) for i, w in items]
        kept = [(i, w) for i, w in scaled if abs(w) > zero_tol]
        if not kept:
            raise ZeroVector("every weight fell below the zero tolerance")
        if len(kept) == len(scaled):
            return tuple(kept)
        items = kept
    return tuple(kept)


def make_direction(weights, dim: int | None = None, zero_tol: float = ZERO_TOL) -> Direction:
    """Build a normalized :class:`Direction`.

    ``weights`` may be a mapping ``index -> weight`` (``dim`` required) or a
    dense 1-D array. Weights that fall to ``zero_tol`` or below after
    normalization are dropped and the remainder renormalized.
    """
    if isinstance(weights, Direction):
        weights, dim = weights.as_dict(), weights.dim if dim is None else dim
    if isinstance(weights, Mapping):
        if dim is None:
            raise ValueError("dim is required for a sparse weight map")
        items = []
        for i, w in weights.items():
            i = int(i)
            if not 0 <= i < dim:
                raise IndexOutOfRange(f"index {i} outside [0, {dim})")
            if w != 0.0:
                items.append((i, float(w)))
    else:
        arr = np.asarray(weights, dtype=np.float64)
        if arr.ndim != 1:
            raise DimensionMismatch("dense weights must be 1-D")
        if dim is not None and dim != arr.shape[0]:
            raise DimensionMismatch(f"dense weights have length {arr.shape[0]}, dim={dim}")
        dim = arr.shape[0]
        items = [(int(i), float(arr[i])) for i in np.flatnonzero(arr)]
    if not items:
        raise ZeroVector("direction has no nonzero weight")
    items.sort()
    return Direction(_normalize_entries(items, dim, zero_tol), int(dim))


def givens_rotate(v: Direction, i: int, j: int, theta: float,
                  zero_tol: float = ZERO_TOL) -> Direction:
    """Rotate coordinates ``i`` and ``j`` of ``v`` by ``theta``.

    ``v_i' = cos(theta) v_i - sin(theta) v_j`` and
    ``v_j' = sin(theta) v_i + cos(theta) v_j``; other coordinates are
    untouched. Coordinates left at or below ``zero_tol`` are dropped.
    """
    if i == j:
        raise EqualIndices(f"rotation needs two distinct coordinates, got {i} twice")
    for idx in (i, j):
        if not 0 <= idx < v.dim:
            raise IndexOutOfRange(f"index {idx} outside [0, {v.dim})")
    w = v.as_dict()
    vi = w.pop(i, 0.0)
    vj = w.pop(j, 0.0)
    c, s = math.cos(theta), math.sin(theta)
    ni = c * vi - s * vj
    nj = s * vi + c * vj
    if abs(ni) > zero_tol:
        w[i] = ni
    if abs(nj) > zero_tol:
        w[j] = nj
    if not w:
        raise ZeroVector("rotation annihilated the direction")
    return Direction(tuple(sorted(w.items())), v.dim)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValueError(f"interval needs a < b, got [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a

    def contains(self, t: float, tol: float = 0.0) -> bool:
        return self.a - tol <= t <= self.b + tol


def grid(interval: Interval, k: int, force_odd: bool = True) -> np.ndarray:
    """Equally spaced grid on ``interval``.

    When the interval straddles zero an even ``k`` is bumped by one so the
    target itself (t = 0 on a symmetric interval) sits on the grid.
    """
    if k < 3:
        raise ValueError(f"grid needs k >= 3, got {k}")
    if force_odd and k % 2 == 0 and interval.a < 0.0 < interval.b:
        k += 1
    return np.linspace(interval.a, interval.b, k)


@dataclass(frozen=True)
class SampledCurve:
    ts: np.ndarray
    fs: np.ndarray
    interval: Interval

    def __post_init__(self):
        if self.ts.shape != self.fs.shape or self.ts.ndim != 1:
            raise DimensionMismatch("ts and fs must be 1-D of equal length")
        if self.ts.shape[0] < 3:
            raise ValueError("curve needs at least 3 grid points")

    @property
    def k(self) -> int:
        return self.ts.shape[0]

    def reversed(self) -> "SampledCurve":
        """The same curve traced along ``-v`` (t -> -t)."""
        return SampledCurve(-self.ts[::-1], self.fs[::-1],
                            Interval(-self.interval.b, -self.interval.a))


CONTRAST_REFERENCES = ("constant_mean", "constant", "model", "taylor", "flip")
PROPERTY_REFERENCES = ("linear", "isotonic", "lipschitz")


@dataclass(frozen=True)
class UtilitySpec:
    """Which utility to maximize.

    ``kind`` is ``"contrast"`` or ``"property"``; ``reference`` names the
    contrast model or the function class. ``params`` carries ``L`` for the
    Lipschitz class, ``attr`` for the flip contrast and ``h`` for the Taylor
    step. ``contrast_model`` is only used by the ``"model"`` contrast.
    """

    kind: str
    reference: str
    loss: str = "squared"
    params: tuple = ()
    contrast_model: object = field(default=None, compare=False, repr=False)
    normalize: bool = True

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise UnsupportedCombination(f"unknown loss {self.loss!r}")
        if self.kind == "contrast":
            if self.reference not in CONTRAST_REFERENCES:
                raise UnsupportedCombination(f"unknown contrast {self.reference!r}")
            if self.reference == "model" and self.contrast_model is None:
                raise UnsupportedCombination("model contrast needs a contrast_model")
            if self.reference == "flip" and "attr" not in self.param_dict:
                raise UnsupportedCombination("flip contrast needs params attr")
        elif self.kind == "property":
            if self.reference not in PROPERTY_REFERENCES:
                raise UnsupportedCombination(f"unknown property class {self.reference!r}")
            if self.reference == "lipschitz":
                L = self.param_dict.get("L")
                if L is None or not L > 0:
                    raise UnsupportedCombination("Lipschitz class needs L > 0")
                if self.loss != "squared":
                    raise UnsupportedCombination("Lipschitz fit supports squared loss only")
        else:
            raise UnsupportedCombination(f"unknown utility kind {self.kind!r}")

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    # convenience constructors
    @classmethod
    def variance(cls, **kw):
        return cls("contrast", "constant_mean", "squared", **kw)

    @classmethod
    def constant_contrast(cls, loss="squared", **kw):
        return cls("contrast", "constant", loss, **kw)

    @classmethod
    def model_contrast(cls, model, loss="squared", **kw):
        return cls("contrast", "model", loss, contrast_model=model, **kw)

    @classmethod
    def taylor(cls, loss="squared", h=None, **kw):
        params = () if h is None else (("h", float(h)),)
        return cls("contrast", "taylor", loss, params=params, **kw)

    @classmethod
    def flip(cls, attr: int, loss="squared", **kw):
        return cls("contrast", "flip", loss, params=(("attr", int(attr)),), **kw)

    @classmethod
    def linear(cls, loss="squared", **kw):
        return cls("property", "linear", loss, **kw)

    @classmethod
    def monotonic(cls, loss="squared", **kw):
        return cls("property", "isotonic", loss, **kw)

    @classmethod
    def lipschitz(cls, L: float, **kw):
        return cls("property", "lipschitz", "squared", params=(("L", float(L)),), **kw)

    def describe(self) -> dict:
        d = {"kind": self.kind, "reference": self.reference, "loss": self.loss,
             "normalize": self.normalize}
        if self.params:
            d["params"] = self.param_dict
        return d
