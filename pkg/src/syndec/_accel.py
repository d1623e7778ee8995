"""Numba switch for the hot kernels.

Kernels are written in the numba-compatible subset of Python and decorated with
:func:`kernel`.  Setting ``SYNDEC_PURE_PYTHON=1`` in the environment (before
import) leaves them as ordinary Python functions, which is slow but runs the
exact same source.  ``benchmarks/bench_kernels.py`` compares both paths.
"""
import os

USE_NUMBA = os.environ.get("SYNDEC_PURE_PYTHON", "0").lower() in ("", "0", "false", "no")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def kernel(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def new_int_map():
    """An int64 -> int64 hash map usable from inside a kernel."""
    if USE_NUMBA:
        from numba import types
        from numba.typed import Dict

        return Dict.empty(key_type=types.int64, value_type=types.int64)
    return {}
