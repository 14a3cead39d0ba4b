"""Greedy coordinate pairs search over sparse plot directions.

Starting from the best single axis, each iteration tries Givens rotations
of coordinate pairs ``(i, j)`` over the angle grid ``{0, pi/M, ..., pi}`` and
keeps the rotation with the best utility, subject to a cap on the number of
nonzero coordinates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Direction, UtilitySpec, givens_rotate, make_direction
from .curves import PlotProblem
from .errors import ADPError, AllAxesDegenerate
from .models import ModelHandle
from .utilities import build_contrast, curve_utility, utility_rows

logger = logging.getLogger(__name__)

PAIR_MODES = ("support", "anchored", "all")


@dataclass(frozen=True)
class GcpConfig:
    sparsity: int = 3
    angles: int = 20
    grid: int = 50
    max_iter: int = 10
    rel_tol: float = 1e-6
    # floor for the relative test so float noise on a zero utility never counts
    abs_tol: float = 1e-12
    objective: str = "maximize"
    # "support": ordered pairs touching the support (same argmax as "all")
    # "anchored": first index in the support only; "all": every ordered pair
    pair_mode: str = "support"

    def __post_init__(self):
        if self.sparsity < 1 or self.angles < 2 or self.max_iter < 1 or self.grid < 3:
            raise ValueError("GcpConfig needs sparsity >= 1, angles >= 2, max_iter >= 1, grid >= 3")
        if self.objective not in ("maximize", "minimize"):
            raise ValueError(f"objective must be maximize or minimize, got {self.objective!r}")
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"pair_mode must be one of {PAIR_MODES}, got {self.pair_mode!r}")

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.angles + 1) * (math.pi / self.angles)

    @property
    def sign(self) -> float:
        return 1.0 if self.objective == "maximize" else -1.0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    i: int | None
    j: int | None
    theta: float | None
    utility: float
    support: tuple
    evaluations: int


@dataclass
class GcpTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    candidate_index: int | None = None

    @property
    def utilities(self) -> list:
        return [r.utility for r in self.records]

    @property
    def utility(self) -> float:
        return self.records[-1].utility

    @property
    def evaluations(self) -> int:
        return self.records[-1].evaluations

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "candidate_index": self.candidate_index,
            "records": [
                {"iteration": r.iteration, "i": r.i, "j": r.j, "theta": r.theta,
                 "utility": r.utility, "support": list(r.support), "evaluations": r.evaluations}
                for r in self.records
            ],
        }


def score_directions(problem: PlotProblem, directions, spec: UtilitySpec,
                     contrast: ModelHandle | None = None) -> np.ndarray:
    """Utility of every direction; ``nan`` where no plot interval exists."""
    samples = problem.sample_many(directions, contrast)
    out = np.full(len(directions), np.nan)
    groups = {}
    for idx, s in enumerate(samples):
        if isinstance(s, ADPError):
            continue
        groups.setdefault(s.curve.k, []).append((idx, s))
    for items in groups.values():
        Fs = np.vstack([s.curve.fs for _, s in items])
        lengths = np.array([s.curve.interval.length for _, s in items])
        Gs = None
        if items[0][1].contrast is not None:
            Gs = np.vstack([s.contrast.fs for _, s in items])
        vals = utility_rows(Fs, lengths, spec, Gs)
        for (idx, _), u in zip(items, vals):
            out[idx] = u
    return out


def _problem(m, x0, cfg, problem, kw) -> PlotProblem:
    if problem is not None:
        return problem
    return PlotProblem(m, x0, k=cfg.grid, **kw)


def _axis_search(problem, spec, cfg, contrast):
    d = problem.dim
    axes = [Direction.axis(i, d) for i in range(d)]
    utils = score_directions(problem, axes, spec, contrast)
    if np.all(np.isnan(utils)):
        raise AllAxesDegenerate("no axis admits a non-degenerate plot interval")
    scores = np.where(np.isnan(utils), -np.inf, cfg.sign * utils)
    best = int(np.argmax(scores))  # first maximum: lowest index wins ties
    return axes[best], float(utils[best]), utils


def best_axis_direction(m: ModelHandle, x0, spec: UtilitySpec, cfg: GcpConfig | None = None,
                        *, problem: PlotProblem | None = None, **problem_kw) -> Direction:
    """Axis ``e_i`` with the best utility, each axis using its own plot interval."""
    cfg = cfg or GcpConfig()
    problem = _problem(m, x0, cfg, problem, problem_kw)
    contrast = build_contrast(spec, problem.model, problem.x0)
    return _axis_search(problem, spec, cfg, contrast)[0]


def _pairs(support, d, mode):
    """Ordered pairs in lexicographic order for the given pair mode.

    Rotating two coordinates that are both zero leaves ``v`` unchanged, so
    ``"support"`` yields the same candidate set as ``"all"`` with those
    no-ops removed. ``"anchored"`` keeps only ``i`` in the support; with
    ``theta`` in ``[0, pi]`` a new coordinate then always takes the sign of
    ``v_i``.
    """
    in_support = set(support)
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            if mode == "anchored" and i not in in_support:
                continue
            if mode == "support" and i not in in_support and j not in in_support:
                continue
            yield i, j


def _candidates(v: Direction, cfg: GcpConfig):
    """Rotations of ``v`` in lexicographic (i, j, angle index) order, deduplicated."""
    seen = {v.entries}
    out = []
    for i, j in _pairs(v.support, v.dim, cfg.pair_mode):
        for t_idx, theta in enumerate(cfg.thetas):
            if t_idx == 0:
                continue  # identical to v, whose utility is already known
            w = givens_rotate(v, i, j, float(theta))
            if w.nnz > cfg.sparsity or w.entries in seen:
                continue
            seen.add(w.entries)
            out.append((i, j, float(theta), w))
    return out


def gcp_search(problem: PlotProblem, spec: UtilitySpec, cfg: GcpConfig | None = None):
    """Run greedy coordinate pairs on a prepared :class:`PlotProblem`."""
    cfg = cfg or GcpConfig()
    m = problem.model
    start = m.eval_count
    contrast = build_contrast(spec, m, problem.x0)
    v, u, _ = _axis_search(problem, spec, cfg, contrast)
    trace = GcpTrace()
    trace.records.append(IterationRecord(0, None, None, None, u, v.support, m.eval_count - start))
    for it in range(1, cfg.max_iter + 1):
        cands = _candidates(v, cfg)
        if not cands:
            trace.converged = True
            break
        utils = score_directions(problem, [c[3] for c in cands], spec, contrast)
        scores = np.where(np.isnan(utils), -np.inf, cfg.sign * utils)
        best = int(np.argmax(scores))
        cur = cfg.sign * u
        gain = scores[best] - cur
        if not gain > cfg.rel_tol * max(abs(cur), cfg.abs_tol):
            trace.converged = True
            break
        i, j, theta, v = cands[best]
        u = float(utils[best])
        trace.records.append(IterationRecord(it, i, j, theta, u, v.support, m.eval_count - start))
    # the final record always reflects every evaluation spent
    last = trace.records[-1]
    if last.evaluations != m.eval_count - start:
        trace.records[-1] = IterationRecord(last.iteration, last.i, last.j, last.theta,
                                            last.utility, last.support, m.eval_count - start)
    return v, trace


def gcp_optimize(m: ModelHandle, x0, spec: UtilitySpec, cfg: GcpConfig | None = None,
                 *, problem: PlotProblem | None = None, **problem_kw):
    """Optimize the plot direction for target ``x0``; returns ``(Direction, GcpTrace)``.

    ``problem_kw`` is forwarded to :class:`PlotProblem` (``box``, ``density``,
    ``family``, ``data``, ``generative``, ``pipeline``, ``latent_bound``).
    """
    cfg = cfg or GcpConfig()
    return gcp_search(_problem(m, x0, cfg, problem, problem_kw), spec, cfg)


def optimize_over_instances(m: ModelHandle, candidates, spec: UtilitySpec,
                            cfg: GcpConfig | None = None, *, problem: PlotProblem | None = None,
                            **problem_kw):
    """Best (direction, target) pair over a list of candidate targets.

    Returns ``(Direction, target, GcpTrace)``; the trace records the winning
    candidate's index. Ties go to the lowest index.
    """
    cfg = cfg or GcpConfig()
    candidates = [np.asarray(c, dtype=np.float64) for c in candidates]
    if not candidates:
        raise ValueError("optimize_over_instances needs at least one candidate")
    base = _problem(m, candidates[0], cfg, problem, problem_kw)
    best = None
    errors = []
    for idx, x0 in enumerate(candidates):
        try:
            v, trace = gcp_search(base.with_target(x0), spec, cfg)
        except ADPError as exc:
            logger.debug("candidate %d skipped: %s", idx, exc)
            errors.append(exc)
            continue
        score = cfg.sign * trace.utility
        if best is None or score > best[0]:
            trace.candidate_index = idx
            best = (score, v, x0, trace)
    if best is None:
        raise errors[-1]
    return best[1], best[2], best[3]


def random_sparse_directions(dim: int, n_samples: int, max_nonzeros: int, rng) -> list:
    """Random directions with a uniform support size in ``1..max_nonzeros``."""
    out = []
    for _ in range(n_samples):
        size = int(rng.integers(1, max_nonzeros + 1))
        support = rng.choice(dim, size=size, replace=False)
        weights = rng.standard_normal(size)
        out.append(make_direction(dict(zip(support.tolist(), weights.tolist())), dim))
    return out


def random_direction_baseline(m: ModelHandle, x0, spec: UtilitySpec, n_samples: int,
                              max_nonzeros: int = 3, seed: int = 0, cfg: GcpConfig | None = None,
                              *, problem: PlotProblem | None = None, **problem_kw) -> list:
    """Utilities of ``n_samples`` random sparse directions (reproducible from ``seed``).

    Directions without a valid plot interval are redrawn.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    cfg = cfg or GcpConfig()
    problem = _problem(m, x0, cfg, problem, problem_kw)
    contrast = build_contrast(spec, problem.model, problem.x0)
    rng = np.random.default_rng(seed)
    d = problem.dim
    max_nonzeros = min(max_nonzeros, d)
    utils = []
    attempts = 0
    while len(utils) < n_samples:
        need = n_samples - len(utils)
        dirs = random_sparse_directions(d, need, max_nonzeros, rng)
        vals = score_directions(problem, dirs, spec, contrast)
        utils.extend(float(u) for u in vals if not np.isnan(u))
        attempts += 1
        if attempts > 100:
            raise AllAxesDegenerate("random directions keep producing degenerate intervals")
    return utils


def render_direction(problem: PlotProblem, v: Direction, spec: UtilitySpec):
    """Sample the final plot and its reference line for reporting.

    Returns ``(CurveSample, utility, ReferenceFit)``.
    """
    contrast = build_contrast(spec, problem.model, problem.x0)
    sample = problem.sample(v, contrast)
    value, fit = curve_utility(sample.curve, spec, sample.contrast)
    return sample, value, fit
