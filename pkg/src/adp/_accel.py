"""Backend switch for the compiled kernels.

Set ``ADP_DISABLE_NUMBA=1`` before import to force the pure-numpy paths.
If numba is not installed the numpy paths are used automatically.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

NUMBA_REQUESTED = os.environ.get("ADP_DISABLE_NUMBA", "0").strip().lower() in _FALSY

try:
    if not NUMBA_REQUESTED:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(fn):
    """Compile ``fn`` with numba when enabled, else return ``None``.

    Callers keep a numpy implementation next to every kernel and pick one at
    import time, so a ``None`` here just means "use the fallback".
    """
    if not HAS_NUMBA:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


def thread_cap():
    """Worker cap from ``ADP_THREADS`` (default 1)."""
    raw = os.environ.get("ADP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
