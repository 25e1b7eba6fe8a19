"""Numba toggle.

Set ``WAVEPWR_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba is also
skipped silently when it cannot be imported.
"""
import os

DISABLED = os.environ.get("WAVEPWR_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba as _numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
