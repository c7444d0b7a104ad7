"""Kernel backend selection.

The hot loops in :mod:`comlab.kernels` are compiled with numba when it is
importable. Set ``COMLAB_BACKEND=numpy`` (or ``COMLAB_DISABLE_NUMBA=1``) before
import to force the pure-numpy path.
"""
import os

_requested = os.environ.get("COMLAB_BACKEND", "numba").strip().lower()
if os.environ.get("COMLAB_DISABLE_NUMBA", "").strip() not in ("", "0"):
    _requested = "numpy"
if _requested not in ("numba", "numpy"):
    raise ImportError(f"COMLAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def default_threads() -> int:
    """Worker count for outer-sample loops, from ``COMLAB_THREADS`` (default 1)."""
    raw = os.environ.get("COMLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
