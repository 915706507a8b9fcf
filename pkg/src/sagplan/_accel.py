"""Numba switch.

Set ``SAGPLAN_DISABLE_NUMBA=1`` before import to run every kernel through
its pure-numpy path instead of the compiled one.
"""
import os

DISABLED = os.environ.get("SAGPLAN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError("numba disabled by SAGPLAN_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(func):
            return func

        return deco
