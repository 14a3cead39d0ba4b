"""Compare the numba kernels with their pure-numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--rows 2000] [--k 51] [--repeat 5]

Also times one full GCP run per backend in a child process, since the
backend is fixed at import time through ADP_DISABLE_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from adp import kernels
from adp._accel import HAS_NUMBA

GCP_SNIPPET = """
import time, numpy as np
from adp import SyntheticSinModel, BoxBound, UtilitySpec, GcpConfig, gcp_optimize
m = SyntheticSinModel.random(10, 0)
box = BoxBound(-np.ones(10), np.ones(10))
gcp_optimize(m, np.zeros(10), UtilitySpec.monotonic(), GcpConfig(), box=box)
t = time.perf_counter()
for seed in range(3):
    gcp_optimize(SyntheticSinModel.random(10, seed), np.zeros(10), UtilitySpec.monotonic(),
                 GcpConfig(), box=box)
print((time.perf_counter() - t) / 3)
"""


def best_of(fn, repeat):
    fn()  # warm up (includes numba compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def gcp_seconds(disable_numba):
    env = dict(os.environ, ADP_DISABLE_NUMBA="1" if disable_numba else "0")
    out = subprocess.run([sys.executable, "-c", GCP_SNIPPET], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--k", type=int, default=51)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    Y = np.cumsum(rng.normal(size=(args.rows, args.k)), axis=1)
    y = np.sin(np.linspace(0.0, 6.0, args.k)) * 10.0
    dt = np.full(args.k - 1, 0.1)

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends))
    cases = [
        (f"pava_rows ({args.rows}x{args.k})", lambda b: kernels.pava_rows(Y, backend=b)),
        (f"pava_l1_rows ({args.rows}x{args.k})", lambda b: kernels.pava_l1_rows(Y, backend=b)),
        (f"lipschitz_pg (k={args.k})", lambda b: kernels.lipschitz_pg(y, dt, 5.0, backend=b)),
    ]
    for name, fn in cases:
        row = [best_of(lambda: fn(b), args.repeat) for b in backends]
        print(f"{name:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row))

    gcp = [gcp_seconds(True)] + ([gcp_seconds(False)] if HAS_NUMBA else [])
    print(f"{'gcp_optimize (sin, d=10)':<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in gcp))


if __name__ == "__main__":
    main()
