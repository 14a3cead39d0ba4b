"""Plot spaces other than raw features: generative latent maps and
parameterized transform pipelines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Dataset, as_instance
from .errors import DegenerateData, DimensionMismatch, ParameterOutOfRange, ScorerFailure
from .models import SubprocessScorer

LATENT_BOUND = 3.0


class GenerativeMap:
    """``decode: R^latent -> R^ambient`` with an approximate inverse ``encode``.

    Both methods take and return 2-D batches.
    """

    latent_dim: int
    ambient_dim: int

    def decode(self, Z) -> np.ndarray:
        raise NotImplementedError

    def encode(self, X) -> np.ndarray:
        raise NotImplementedError

    def reconstruction_residual(self, x) -> float:
        x = as_instance(x, self.ambient_dim)
        back = self.decode(self.encode(x[None, :]))[0]
        return float(np.linalg.norm(back - x))


@dataclass(frozen=True)
class AffineGenerativeMap(GenerativeMap):
    """PCA map ``x = mean + basis @ (scales * z)`` with whitened latent units.

    ``scales`` holds the training standard deviation of each latent
    coordinate so that plot bounds in latent space are in standard units.
    """

    mean: np.ndarray
    basis: np.ndarray
    scales: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.basis.ndim != 2 or self.basis.shape[0] != self.mean.shape[0]:
            raise DimensionMismatch("basis must be (ambient_dim, latent_dim)")
        if self.scales is None:
            object.__setattr__(self, "scales", np.ones(self.basis.shape[1]))

    @property
    def latent_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    def encode(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return ((X - self.mean) @ self.basis) / self.scales

    def decode(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return self.mean + (Z * self.scales) @ self.basis.T

    @classmethod
    def identity(cls, dim: int) -> "AffineGenerativeMap":
        return cls(np.zeros(dim), np.eye(dim), np.ones(dim))


def fit_affine_map(data, latent_dim: int, whiten: bool = True) -> AffineGenerativeMap:
    """Top principal directions of ``data`` as an affine generative map.

    Each basis vector is signed so its largest-magnitude component is
    positive. With ``whiten`` the latent coordinates are divided by their
    training standard deviation.
    """
    rows = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n, d = rows.shape
    if not 1 <= latent_dim <= min(n - 1, d):
        raise DegenerateData(f"latent_dim must lie in [1, {min(n - 1, d)}], got {latent_dim}")
    mean = rows.mean(axis=0)
    centered = rows - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(n, d) * np.finfo(float).eps * (svals[0] if svals.size else 0.0)
    if svals.size < latent_dim or svals[latent_dim - 1] <= tol:
        raise DegenerateData(f"data covariance has rank below {latent_dim}")
    basis = vt[:latent_dim].T.copy()
    for j in range(latent_dim):
        col = basis[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            basis[:, j] = -col
    if whiten:
        scales = svals[:latent_dim] / np.sqrt(n - 1)
    else:
        scales = np.ones(latent_dim)
    return AffineGenerativeMap(mean, basis, scales)


class _VectorScorer(SubprocessScorer):
    """Subprocess protocol variant whose reply lines are CSV vectors."""

    def __init__(self, command, width):
        super().__init__(command)
        self.width = width

    def __call__(self, X):
        payload = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in X) + "\n"
        lines = self._exchange(payload, X.shape[0])
        out = np.empty((X.shape[0], self.width))
        for i, line in enumerate(lines):
            try:
                vals = [float(s) for s in line.split(",")]
            except ValueError as exc:
                raise ScorerFailure(f"map protocol error: {exc}") from exc
            if len(vals) != self.width:
                raise ScorerFailure(f"expected {self.width} values per line, got {len(vals)}")
            out[i] = vals
        return out


class ExternalGenerativeMap(GenerativeMap):
    """Decode/encode through two child processes speaking the line protocol."""

    def __init__(self, decode_cmd: str, encode_cmd: str, latent_dim: int, ambient_dim: int):
        self.latent_dim = latent_dim
        self.ambient_dim = ambient_dim
        self._dec = _VectorScorer(decode_cmd, ambient_dim)
        self._enc = _VectorScorer(encode_cmd, latent_dim)

    def decode(self, Z):
        return self._dec(np.atleast_2d(np.asarray(Z, dtype=np.float64)))

    def encode(self, X):
        return self._enc(np.atleast_2d(np.asarray(X, dtype=np.float64)))

    def close(self):
        self._dec.close()
        self._enc.close()


# ---------------------------------------------------------------------------
# transform pipelines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transform:
    """Parameterized map ``lambda_v`` with ``lambda_0`` the identity.

    ``fn(X, v)`` receives a batch ``X`` of shape ``(n, d)`` and per-row
    parameters ``v`` of shape ``(n,)`` and must return ``X`` itself for rows
    with ``v == 0``.
    """

    name: str
    fn: Callable

    def __call__(self, X, v):
        v = np.asarray(v, dtype=np.float64)
        out = self.fn(X, v)
        # lambda_0 is the identity bit for bit
        return np.where((v == 0.0)[:, None], X, out)


def gain(max_gain: float = 1.0) -> Transform:
    return Transform("gain", lambda X, v: X * (1.0 + max_gain * v[:, None]))


def offset(amount=1.0) -> Transform:
    amount = np.asarray(amount, dtype=np.float64)
    return Transform("offset", lambda X, v: X + v[:, None] * amount)


def clamp(lo, hi) -> Transform:
    """Pull every value toward ``[lo, hi]``; fully clamped at ``v = 1``."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    return Transform("clamp", lambda X, v: X + v[:, None] * (np.clip(X, lo, hi) - X))


def smooth(window: int = 3) -> Transform:
    """Blend toward a centred moving average along the feature axis."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    half = window // 2

    def fn(X, v):
        padded = np.pad(X, ((0, 0), (half, half)), mode="edge")
        csum = np.cumsum(padded, axis=1)
        csum = np.concatenate([np.zeros((X.shape[0], 1)), csum], axis=1)
        avg = (csum[:, window:] - csum[:, :-window]) / window
        return X + v[:, None] * (avg - X)

    return Transform("smooth", fn)


BUILTIN_TRANSFORMS = {"gain": gain, "offset": offset, "clamp": clamp, "smooth": smooth}


@dataclass(frozen=True)
class TransformPipeline:
    transforms: tuple

    def __init__(self, transforms: Sequence[Transform]):
        object.__setattr__(self, "transforms", tuple(transforms))

    @property
    def length(self) -> int:
        return len(self.transforms)

    @property
    def names(self) -> list:
        return [t.name for t in self.transforms]

    def apply(self, x0, params) -> np.ndarray:
        """Compose all transforms on ``x0`` for each row of ``params`` (shape ``(n, l)``)."""
        params = np.atleast_2d(np.asarray(params, dtype=np.float64))
        if params.shape[1] != self.length:
            raise DimensionMismatch(f"{params.shape[1]} parameters for {self.length} transforms")
        if np.any(params < 0.0) or np.any(params > 1.0):
            raise ParameterOutOfRange("transform parameters must lie in [0, 1]")
        X = np.repeat(np.asarray(x0, dtype=np.float64)[None, :], params.shape[0], axis=0)
        for i, tr in enumerate(self.transforms):
            X = tr(X, params[:, i])
        return X


def compose_transforms(p: TransformPipeline, x0, v, t: float) -> np.ndarray:
    """``Lambda_{x0}(v t)``: each transform applied in order at parameter ``v_i t``."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ParameterOutOfRange("direction must lie in the unit cube")
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"t must lie in [0, 1], got {t}")
    return p.apply(as_instance(x0), (v * t)[None, :])[0]
