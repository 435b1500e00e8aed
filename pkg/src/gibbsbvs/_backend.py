"""Numba backend switch.

Hot kernels in :mod:`gibbsbvs._kernels` are written as plain Python over numpy
arrays and decorated with :func:`njit`. When numba is available (and not
disabled) that is the real ``numba.njit``; otherwise kernels run as pure
numpy/Python, which is slower but produces the same integer RNG streams and
numerically equivalent floats.

Set the environment variable ``GIBBSBVS_NUMBA=0`` before import to force the
pure-Python path (used by the backend benchmark and the fallback tests).
"""

import functools
import os

import numpy as np

_FLAG = os.environ.get("GIBBSBVS_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "off", "no")

NUMBA_ENABLED = False

if _WANT_NUMBA:
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def njit(*args, **kwargs):
        return _numba_njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        # Identity decorator; errstate silences the intended uint64 wraparound
        # in the counter-based RNG, which numpy warns about for scalars.
        def decorate(fn):
            @functools.wraps(fn)
            def wrapper(*a, **k):
                with np.errstate(over="ignore"):
                    return fn(*a, **k)

            wrapper.py_func = fn
            return wrapper

        if args and callable(args[0]) and not kwargs and len(args) == 1:
            return decorate(args[0])
        return decorate


def py_kernel(fn):
    """Return the un-jitted Python version of a kernel (itself if not jitted)."""
    return getattr(fn, "py_func", fn)
