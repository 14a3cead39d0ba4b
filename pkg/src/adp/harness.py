"""Desk-scale optimization experiments: planted-direction recovery, the
sin-model sanity check and the random-direction utility histogram.

Every report is a plain JSON-serializable dict and is reproducible from
``(seed, config)`` alone.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from ._accel import thread_cap
from .bounds import BoxBound
from .core import UtilitySpec
from .errors import GenerationFailure
from .models import SyntheticSinModel, make_random_nonmonotone_model
from .optimizer import GcpConfig, gcp_optimize, random_direction_baseline

logger = logging.getLogger(__name__)

SUCCESS_COSINE = 0.9
SIN_ALIGNMENT = 0.99


class RecoveryFailure(AssertionError):
    """A recovery check failed; ``report`` holds the full traces."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def trial_seed(seed: int, *keys: int) -> int:
    """Per-trial seed derived from the master seed and the trial's keys."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def _map(fn, items, threads):
    threads = thread_cap() if threads is None else max(1, int(threads))
    if threads == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _recovery_trial(args):
    seed, dim, size, cfg = args
    try:
        m = make_random_nonmonotone_model(seed, dim, size)
    except GenerationFailure:
        return None
    x0, box, density = m.plot_bounds()
    v, trace = gcp_optimize(m, x0, UtilitySpec.monotonic(), cfg, box=box, density=density)
    w = m.planted_direction
    cosine = abs(float(v.to_dense() @ w.to_dense()))
    same_support = set(v.support) == set(w.support)
    return {
        "seed": seed,
        "planted": {str(i): x for i, x in w.entries},
        "found": {str(i): x for i, x in v.entries},
        "cosine": cosine,
        "success": bool(same_support and cosine >= SUCCESS_COSINE),
        "utility": trace.utility,
        "evaluations": trace.evaluations,
    }


def run_synthetic_recovery(n_trials: int = 100, dim: int = 10, support_sizes=(1, 2, 3),
                           cfg: GcpConfig | None = None, seed: int = 0,
                           threads: int | None = None) -> dict:
    """Success rate of GCP at recovering planted least-monotone directions.

    A trial succeeds when the returned support equals the planted support and
    ``|<v, w>| >= 0.9``. Trials whose model could not be generated are left
    out of the rate and counted under ``generation_failures``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    cfg = cfg or GcpConfig()
    start = time.perf_counter()
    report = {"n_trials": n_trials, "dim": dim, "seed": seed, "config": asdict(cfg),
              "rates": {}, "successes": {}, "completed": {}, "generation_failures": {},
              "failed_trials": {}}
    for size in support_sizes:
        jobs = [(trial_seed(seed, size, t), dim, size, cfg) for t in range(n_trials)]
        results = _map(_recovery_trial, jobs, threads)
        done = [r for r in results if r is not None]
        n_fail = len(results) - len(done)
        if n_fail:
            logger.warning("support size %d: %d trials skipped (generation failure)", size, n_fail)
        wins = sum(r["success"] for r in done)
        key = str(size)
        report["rates"][key] = wins / len(done) if done else float("nan")
        report["successes"][key] = wins
        report["completed"][key] = len(done)
        report["generation_failures"][key] = n_fail
        report["failed_trials"][key] = [r for r in done if not r["success"]]
    report["seconds"] = time.perf_counter() - start
    return report


def _span01_alignment(v) -> float:
    """Norm of the projection of unit ``v`` onto ``span(e_0, e_1)``."""
    dense = v.to_dense()
    return float(np.hypot(dense[0], dense[1]))


def run_sin_recovery(cfg: GcpConfig | None = None, seed: int = 0, dim: int = 10,
                     check: bool = True) -> dict:
    """Both the Taylor-contrast and monotonicity utilities should pick ``x_0``/``x_1``.

    The sin model ``sin(2 x_0) + cos(3 x_1) + beta . x[2:]`` is plotted from
    the origin inside ``[-1, 1]^d``. With ``check`` a :class:`RecoveryFailure`
    carrying the report is raised when either direction leaves the plane.
    """
    cfg = cfg or GcpConfig()
    m = SyntheticSinModel.random(dim, seed)
    box = BoxBound(-np.ones(dim), np.ones(dim))
    x0 = np.zeros(dim)
    report = {"seed": seed, "dim": dim, "beta": m.beta.tolist(), "config": asdict(cfg),
              "results": {}}
    ok = True
    for name, spec in (("taylor", UtilitySpec.taylor()), ("monotonic", UtilitySpec.monotonic())):
        start = time.perf_counter()
        v, trace = gcp_optimize(m, x0, spec, cfg, box=box)
        align = _span01_alignment(v)
        passed = set(v.support) <= {0, 1} and align >= SIN_ALIGNMENT
        ok = ok and passed
        report["results"][name] = {
            "direction": {str(i): x for i, x in v.entries},
            "alignment": align,
            "passed": passed,
            "utility": trace.utility,
            "trace": trace.to_dict(),
            "seconds": time.perf_counter() - start,
        }
    report["passed"] = ok
    if check and not ok:
        raise RecoveryFailure("sin-model directions left span(e_0, e_1)", report)
    return report


def run_utility_histogram(m, x0, spec: UtilitySpec, n_samples: int = 1000,
                          cfg: GcpConfig | None = None, seed: int = 0, max_nonzeros: int = 3,
                          bins: int = 20, **problem_kw) -> dict:
    """Random sparse directions versus the optimized one.

    ``exceedance_rank`` counts random utilities strictly above the optimized
    utility (0 means GCP beat or tied every sample).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    cfg = cfg or GcpConfig()
    utils = random_direction_baseline(m, x0, spec, n_samples, max_nonzeros, seed, cfg,
                                      **problem_kw)
    v, trace = gcp_optimize(m, x0, spec, cfg, **problem_kw)
    best = trace.utility
    counts, edges = np.histogram(utils, bins=bins)
    return {
        "n_samples": n_samples,
        "max_nonzeros": max_nonzeros,
        "seed": seed,
        "utilities": sorted(utils),
        "optimized_utility": best,
        "optimized_direction": {str(i): x for i, x in v.entries},
        "exceedance_rank": int(sum(u > best for u in utils)),
        "max_random_utility": max(utils),
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }


def sin_histogram(n_samples: int = 1000, cfg: GcpConfig | None = None, seed: int = 0,
                  dim: int = 10, spec: UtilitySpec | None = None, max_nonzeros: int = 3) -> dict:
    """:func:`run_utility_histogram` on the sin model from the origin in ``[-1, 1]^d``."""
    m = SyntheticSinModel.random(dim, seed)
    box = BoxBound(-np.ones(dim), np.ones(dim))
    spec = spec or UtilitySpec.monotonic()
    report = run_utility_histogram(m, np.zeros(dim), spec, n_samples, cfg, seed,
                                   max_nonzeros, box=box)
    report["utility_spec"] = spec.describe()
    return report
