"""Black-box model handles and their providers.

A :class:`ModelHandle` wraps a batch evaluator ``(n, d) array -> (n,) array``
and counts single-point evaluations. Everything the optimizer knows about a
model goes through :meth:`ModelHandle.evaluate_batch`.
"""
from __future__ import annotations

import json
import logging
import math
import queue
import subprocess
import tempfile
import threading
import urllib.error
import urllib.request
from typing import Callable

import numpy as np

from . import kernels
from .core import Direction, Interval, SampledCurve, UtilitySpec, as_instance, grid
from .errors import (
    ConfigError,
    DimensionMismatch,
    GenerationFailure,
    IndexOutOfRange,
    ScorerFailure,
)

logger = logging.getLogger(__name__)

PURE = "pure"
SERIALIZED = "serialized"


class ModelHandle:
    """Deterministic scalar model ``f: R^d -> R`` with an evaluation counter.

    Parameters
    ----------
    evaluator
        Callable mapping an ``(n, d)`` float array to ``n`` scores.
    dim
        Input dimension ``d``.
    name
        Label used in reports.
    concurrency
        ``"pure"`` handles may be called from several threads at once;
        ``"serialized"`` handles take a lock around every batch.
    """

    def __init__(self, evaluator: Callable, dim: int, name: str = "model",
                 concurrency: str = PURE):
        self._evaluator = evaluator
        self.dim = int(dim)
        self.name = name
        self.concurrency = concurrency
        self._count = 0
        self._count_lock = threading.Lock()
        self._call_lock = threading.Lock() if concurrency == SERIALIZED else None

    @property
    def eval_count(self) -> int:
        return self._count

    def evaluate_batch(self, points) -> np.ndarray:
        X = np.asarray(points, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch(
                f"{self.name}: expected points of length {self.dim}, got shape {X.shape}")
        n = X.shape[0]
        if n == 0:
            return np.empty(0)
        if self._call_lock is not None:
            with self._call_lock:
                out = self._evaluator(X)
        else:
            out = self._evaluator(X)
        out = np.asarray(out, dtype=np.float64).reshape(-1)
        if out.shape[0] != n:
            raise ScorerFailure(f"{self.name}: returned {out.shape[0]} scores for {n} points")
        with self._count_lock:
            self._count += n
        return out

    def __call__(self, x) -> float:
        return float(self.evaluate_batch(as_instance(x, self.dim))[0])

    def close(self):
        """Release external resources; a no-op for in-process models."""

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, dim={self.dim})"


# ---------------------------------------------------------------------------
# builtin providers
# ---------------------------------------------------------------------------

def linear_model(coef, intercept: float = 0.0, name: str = "linear") -> ModelHandle:
    coef = np.asarray(coef, dtype=np.float64)
    intercept = float(intercept)
    return ModelHandle(lambda X: X @ coef + intercept, coef.shape[0], name)


def quadratic_model(coef, quad, intercept: float = 0.0, name: str = "quadratic") -> ModelHandle:
    """``f(x) = intercept + coef.x + x^T Q x``; a 1-D ``quad`` is a diagonal."""
    coef = np.asarray(coef, dtype=np.float64)
    Q = np.asarray(quad, dtype=np.float64)
    if Q.ndim == 1:
        Q = np.diag(Q)
    if Q.shape != (coef.shape[0], coef.shape[0]):
        raise DimensionMismatch(f"quad has shape {Q.shape}, expected {(coef.shape[0],) * 2}")
    intercept = float(intercept)

    def evaluate(X):
        return intercept + X @ coef + np.einsum("ni,ij,nj->n", X, Q, X)

    return ModelHandle(evaluate, coef.shape[0], name)


def function_model(fn: Callable, dim: int, name: str = "function") -> ModelHandle:
    """Wrap a vectorized numpy function of an ``(n, d)`` array."""
    return ModelHandle(fn, dim, name)


class SyntheticSinModel(ModelHandle):
    """``f(x) = sin(2 x_0) + cos(3 x_1) + beta . x[2:]``."""

    def __init__(self, beta=(), dim: int | None = None):
        beta = np.asarray(beta, dtype=np.float64).reshape(-1)
        if dim is None:
            dim = beta.shape[0] + 2
        if dim < 2:
            raise DimensionMismatch("the sin model needs d >= 2")
        if beta.shape[0] == 0:
            beta = np.zeros(dim - 2)
        if beta.shape[0] != dim - 2:
            raise DimensionMismatch(f"beta has length {beta.shape[0]}, expected {dim - 2}")
        self.beta = beta
        super().__init__(self._evaluate, dim, "sin")

    def _evaluate(self, X):
        return np.sin(2.0 * X[:, 0]) + np.cos(3.0 * X[:, 1]) + X[:, 2:] @ self.beta

    @classmethod
    def random(cls, dim: int = 10, seed: int = 0, scale: float = 0.1) -> "SyntheticSinModel":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(scale=scale, size=dim - 2), dim)


# ---------------------------------------------------------------------------
# contrast models
# ---------------------------------------------------------------------------

def constant_contrast(m: ModelHandle, x0) -> ModelHandle:
    """``g(x) = f(x0)`` everywhere (one evaluation of ``f``)."""
    value = m(as_instance(x0, m.dim))
    return ModelHandle(lambda X: np.full(X.shape[0], value), m.dim,
                       f"const({m.name})")


def default_fd_steps(x0) -> np.ndarray:
    return 1e-4 * (1.0 + np.abs(x0))


def taylor_contrast(m: ModelHandle, x0, h=None) -> ModelHandle:
    """First-order expansion of ``f`` around ``x0`` from central differences.

    ``h`` may be a scalar or per-coordinate steps; the default is
    ``1e-4 * (1 + |x0_j|)``. Costs ``2 d + 1`` evaluations of ``f``.
    """
    x0 = as_instance(x0, m.dim)
    d = m.dim
    steps = default_fd_steps(x0) if h is None else np.broadcast_to(
        np.asarray(h, dtype=np.float64), (d,)).copy()
    if np.any(steps <= 0):
        raise ValueError("finite-difference step must be positive")
    E = np.diag(steps)
    pts = np.vstack([x0[None, :], x0 + E, x0 - E])
    vals = m.evaluate_batch(pts)
    f0 = vals[0]
    grad = (vals[1:d + 1] - vals[d + 1:]) / (2.0 * steps)
    handle = ModelHandle(lambda X: f0 + (X - x0) @ grad, d, f"taylor({m.name})")
    handle.gradient = grad
    handle.anchor = x0
    return handle


def flip_attribute_contrast(m: ModelHandle, attr: int) -> ModelHandle:
    """``g(x) = f(sigma(x))`` where sigma replaces ``x[attr]`` by ``1 - x[attr]``."""
    if not 0 <= attr < m.dim:
        raise IndexOutOfRange(f"attribute {attr} outside [0, {m.dim})")

    def evaluate(X):
        Y = X.copy()
        Y[:, attr] = 1.0 - Y[:, attr]
        return m.evaluate_batch(Y)

    return ModelHandle(evaluate, m.dim, f"flip{attr}({m.name})", m.concurrency)


# ---------------------------------------------------------------------------
# planted non-monotone models
# ---------------------------------------------------------------------------

class RandomNonMonotoneModel(ModelHandle):
    """``f(x) = p(w . x_S) + c * sum_{j not in S} x_j``.

    The plot setup the model was validated against is the target ``x0 = 0``
    with every direction bounded to ``t in [-radius, radius]`` (a unit
    Gaussian density threshold of ``radius**2``); see :meth:`plot_bounds`.
    """

    def __init__(self, seed, dim, planted_support, weights, poly, c, radius):
        self.seed = seed
        self.planted_support = tuple(int(i) for i in planted_support)
        self.planted_weights = np.asarray(weights, dtype=np.float64)
        self.poly = np.asarray(poly, dtype=np.float64)  # highest degree first
        self.c = float(c)
        self.radius = float(radius)
        mask = np.ones(dim, dtype=bool)
        mask[list(self.planted_support)] = False
        self._dead = mask
        self._S = np.array(self.planted_support)
        super().__init__(self._evaluate, dim, f"nonmono[{seed}]")

    def _evaluate(self, X):
        u = X[:, self._S] @ self.planted_weights
        return np.polyval(self.poly, u) + self.c * X[:, self._dead].sum(axis=1)

    @property
    def planted_direction(self) -> Direction:
        return Direction(tuple(zip(self.planted_support, self.planted_weights.tolist())),
                         self.dim)

    def plot_bounds(self):
        """``(x0, box, density)`` for the validated plot setup."""
        from .bounds import BoxBound, GaussianDensity

        d = self.dim
        box = BoxBound(np.full(d, -10.0 * self.radius), np.full(d, 10.0 * self.radius))
        density = GaussianDensity.from_threshold(np.zeros(d), np.eye(d), self.radius ** 2)
        return np.zeros(d), box, density


def _random_poly(rng, radius):
    """Odd-degree polynomial whose derivative has all roots inside the interval."""
    degree = int(rng.choice([3, 5]))
    n_ext = degree - 1
    ext = np.sort(rng.uniform(-0.6 * radius, 0.6 * radius, size=n_ext))
    dpoly = np.poly(ext) * rng.choice([-1.0, 1.0]) * math.exp(rng.normal(0.0, 0.5))
    return np.polyint(dpoly)


def _orientation_gap(poly, ts):
    fs = np.polyval(poly, ts)
    inc = kernels.pava_rows(fs)
    dec = -kernels.pava_rows(-fs)
    w = np.ones(ts.shape[0])
    w[0] = w[-1] = 0.5
    return float(((fs - inc) ** 2) @ w - ((fs - dec) ** 2) @ w)


def _balance(poly, ts, tol=1e-13):
    """Add ``a u`` to ``p`` so its increasing and decreasing fits tie.

    With the tie, the monotonicity utility (the smaller of the two losses)
    drops to first order whichever linear tail a tilted direction adds,
    which makes the planted direction a strict local maximum.
    """
    def shifted(a):
        q = poly.copy()
        q[-2] += a
        return q

    lo, hi = -1.0, 1.0
    while _orientation_gap(shifted(lo), ts) < 0.0:
        lo *= 2.0
        if lo < -1e6:
            return None
    while _orientation_gap(shifted(hi), ts) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            return None
    # the gap (increasing minus decreasing loss) falls as the slope a grows
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _orientation_gap(shifted(mid), ts) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return shifted(0.5 * (lo + hi))


def _mixed_curves(poly, radius, k, lam_max, angles):
    """Curves ``p(s t) + lam t`` seen by unit directions that tilt away from ``w``.

    A unit direction with ``|w . v| = s`` sees ``p`` at scale ``s`` plus a
    linear tail of slope at most ``lam_max * sqrt(1 - s^2)``. Scales follow
    the angle lattice ``cos(m pi / angles)``.
    """
    iv = Interval(-radius, radius)
    ts = grid(iv, k)
    rows = []
    for m in range(angles // 2 + 1):
        s = math.cos(m * math.pi / angles)
        band = lam_max * math.sqrt(max(1.0 - s * s, 0.0))
        for lam in np.linspace(-band, band, 11):
            rows.append(np.polyval(poly, s * ts) + lam * ts)
    return ts, np.vstack(rows)


def make_random_nonmonotone_model(seed, dim: int, support_size: int, c: float = 0.01,
                                  radius: float = 1.0, k: int = 50, max_attempts: int = 100,
                                  min_weight: float = 0.2, angles: int = 20) -> RandomNonMonotoneModel:
    """Draw a model whose least-monotone direction is known in advance.

    Every attempt samples a support ``S``, a unit vector ``w`` on it (every
    ``|w_i| >= min_weight``) and an odd-degree polynomial ``p`` with interior
    extrema, rescaled to unit variance on the plot interval and then tilted
    by a linear term so its increasing and decreasing monotone fits tie. The
    draw is kept only if, on the validated plot setup,

    * the monotonicity utility along ``w`` is at least 1% of the curve's
      variance and at least 10x that of every axis outside ``S``, and
    * no direction tilted away from ``w`` by a multiple of ``pi / angles``
      (toward other planted or dead coordinates) has a larger utility.
    """
    from .utilities import utility_rows, variance_utility

    if not 1 <= support_size <= dim:
        raise ValueError(f"support_size must lie in [1, {dim}], got {support_size}")
    rng = np.random.default_rng(seed)
    spec = UtilitySpec.monotonic()
    iv = Interval(-radius, radius)
    ts = grid(iv, k)

    def mono(fs):
        return float(utility_rows(np.atleast_2d(fs), [iv.length], spec)[0])

    n_dead = dim - support_size
    for _ in range(max_attempts):
        S = np.sort(rng.choice(dim, size=support_size, replace=False))
        w = rng.normal(size=support_size)
        w /= np.linalg.norm(w)
        if np.min(np.abs(w)) < min_weight:
            continue
        poly = _random_poly(rng, radius)
        var = variance_utility(SampledCurve(ts, np.polyval(poly, ts), iv))
        if not var > 0.0:
            continue
        poly = _balance(poly / math.sqrt(var), ts)
        if poly is None:
            continue
        full = np.polyval(poly, ts)
        u_w = mono(full)
        if u_w < 0.01 * variance_utility(SampledCurve(ts, full, iv)):
            continue
        if n_dead and not u_w > 10.0 * mono(full[ts.shape[0] // 2] + c * ts):
            continue
        _, rows = _mixed_curves(poly, radius, k, c * math.sqrt(n_dead), angles)
        others = utility_rows(rows, np.full(rows.shape[0], iv.length), spec)
        if np.max(others) > u_w * (1.0 + 1e-9):
            continue
        return RandomNonMonotoneModel(seed, dim, S, w, poly, c, radius)
    raise GenerationFailure(
        f"no acceptable planted model after {max_attempts} attempts (seed={seed})")


# ---------------------------------------------------------------------------
# external scorers
# ---------------------------------------------------------------------------

def _format_row(row) -> str:
    return ",".join(repr(float(v)) for v in row)


class SubprocessScorer:
    """Line protocol over a child process's stdin/stdout.

    Each batch is written as header-less CSV rows followed by a blank line;
    the child answers one decimal score per row. Closing stdin ends the child.
    """

    def __init__(self, command: str, timeout: float = 60.0):
        self.command = command
        self.timeout = timeout
        self._stderr = tempfile.TemporaryFile(mode="w+")
        try:
            self._proc = subprocess.Popen(
                command, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=self._stderr, text=True, bufsize=1)
        except OSError as exc:
            raise ScorerFailure(f"cannot start scorer {command!r}: {exc}") from exc
        # stdout is drained by a thread so a silent child cannot block us forever
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _diagnostic(self) -> str:
        self._stderr.seek(0)
        return self._stderr.read()[-2000:]

    def _exchange(self, payload: str, n: int) -> list:
        """Send one batch and collect ``n`` reply lines."""
        proc = self._proc
        if proc.poll() is not None:
            raise ScorerFailure(
                f"scorer exited with code {proc.returncode}: {self._diagnostic()}")
        try:
            proc.stdin.write(payload)
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerFailure(f"scorer protocol error: {exc}; {self._diagnostic()}") from exc
        lines = []
        for _ in range(n):
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                proc.kill()  # the stream is out of step now
                raise ScorerFailure(
                    f"scorer sent {len(lines)} of {n} replies within "
                    f"{self.timeout}s: {self._diagnostic()}") from None
            if line is None:
                self._lines.put(None)
                raise ScorerFailure(
                    f"scorer closed its output after {len(lines)} of {n} replies: "
                    f"{self._diagnostic()}")
            lines.append(line.strip())
        return lines

    def __call__(self, X) -> np.ndarray:
        payload = "".join(_format_row(row) + "\n" for row in X) + "\n"
        lines = self._exchange(payload, X.shape[0])
        try:
            return np.array([float(line) for line in lines])
        except ValueError as exc:
            raise ScorerFailure(f"scorer protocol error: {exc}") from exc

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=self.timeout)
            except (subprocess.TimeoutExpired, BrokenPipeError, OSError):
                self._proc.kill()
                self._proc.wait()
        self._stderr.close()


class HttpScorer:
    """``POST <url>/score`` with ``{"instances": [...]}``, expecting ``{"scores": [...]}``."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url.rstrip("/")
        if not self.url.endswith("/score"):
            self.url += "/score"
        self.timeout = timeout

    def __call__(self, X) -> np.ndarray:
        body = json.dumps({"instances": X.tolist()}).encode()
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                status = resp.status
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            raise ScorerFailure(f"HTTP {exc.code} from {self.url}: {exc.read()[:500]!r}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise ScorerFailure(f"cannot reach {self.url}: {exc}") from exc
        if not 200 <= status < 300:
            raise ScorerFailure(f"HTTP {status} from {self.url}")
        try:
            scores = json.loads(raw)["scores"]
            arr = np.asarray(scores, dtype=np.float64).reshape(-1)
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerFailure(f"malformed response from {self.url}: {raw[:500]!r}") from exc
        if arr.shape[0] != X.shape[0]:
            raise ScorerFailure(
                f"{self.url} returned {arr.shape[0]} scores for {X.shape[0]} instances")
        return arr

    def close(self):
        pass


class ExternalModel(ModelHandle):
    def __init__(self, scorer, dim: int, name: str):
        self._scorer = scorer
        super().__init__(scorer, dim, name, SERIALIZED)

    def close(self):
        self._scorer.close()


def subprocess_model(command: str, dim: int, timeout: float = 60.0) -> ExternalModel:
    return ExternalModel(SubprocessScorer(command, timeout), dim, f"cmd:{command}")


def http_model(url: str, dim: int) -> ExternalModel:
    return ExternalModel(HttpScorer(url), dim, f"http:{url}")


def _read_params(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def load_model(uri: str, dim: int) -> ModelHandle:
    """Resolve a model URI.

    ``builtin:<name>[:paramfile]`` with name in ``linear``, ``quadratic``,
    ``sin``; ``cmd:<shell command>``; ``http:<url>``.
    """
    scheme, _, rest = uri.partition(":")
    if scheme == "cmd":
        return subprocess_model(rest, dim)
    if scheme == "http":
        return http_model(rest if "://" in rest else "http:" + rest, dim)
    if scheme != "builtin":
        raise ConfigError(f"unknown model scheme in {uri!r}")
    name, _, paramfile = rest.partition(":")
    params = _read_params(paramfile or None)
    if name == "linear":
        m = linear_model(params.get("coef", np.ones(dim)), params.get("intercept", 0.0))
    elif name == "quadratic":
        m = quadratic_model(params.get("coef", np.zeros(dim)),
                            params.get("quad", np.ones(dim)), params.get("intercept", 0.0))
    elif name == "sin":
        if "beta" in params:
            m = SyntheticSinModel(params["beta"])
        elif "seed" in params:
            m = SyntheticSinModel.random(dim, int(params["seed"]), float(params.get("scale", 0.1)))
        else:
            m = SyntheticSinModel(dim=dim)
    else:
        raise ConfigError(f"unknown builtin model {name!r}")
    if m.dim != dim:
        raise DimensionMismatch(f"model {uri!r} has dimension {m.dim}, data has {dim}")
    return m
