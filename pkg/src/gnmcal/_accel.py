"""Optional numba acceleration.

Set ``GNM_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba is
not importable the numpy path is used regardless.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

_DISABLED = os.environ.get("GNM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(f=None, **options):
    """``numba.njit`` when available, identity otherwise."""
    options.setdefault("cache", True)
    if numba is None:
        if f is None:
            return lambda g: g
        return f
    if f is None:
        return lambda g: numba.njit(g, **options)
    return numba.njit(f, **options)
