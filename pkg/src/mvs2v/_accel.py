"""Numba dispatch.

Hot kernels are written once as plain Python loops and compiled with
``numba.njit`` when available. Set ``MVS2V_NO_NUMBA=1`` to force the
pure-numpy fallbacks (useful for debugging and for the benchmark).
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("MVS2V_NO_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Compilation is lazy, so kernels are only built if the numba path is
    actually selected.
    """
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda fn: fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
