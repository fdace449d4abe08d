"""Numba acceleration toggle.

Hot kernels ship in two variants: an explicit-loop version compiled with
``numba.njit`` and a vectorized pure-numpy fallback.  Which one the package
uses is decided once at import time: set ``SWARMCOV_NO_NUMBA=1`` in the
environment (or run without numba installed) to force the numpy path.
Both variants compute the same floating-point operations in the same order,
so results match bit for bit.
"""

from __future__ import annotations

import os

__all__ = ["NUMBA_ENABLED", "njit"]


def _env_disabled() -> bool:
    return os.environ.get("SWARMCOV_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


try:
    if _env_disabled():
        raise ImportError("numba disabled via SWARMCOV_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:

    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        """No-op stand-in so modules can decorate unconditionally."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
