"""Backend selection for the hot kernels.

Set ``CTCONSENSUS_DISABLE_NUMBA=1`` to force the pure-numpy code paths.
"""

import os

_DISABLE = os.environ.get("CTCONSENSUS_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLE


def njit(func):
    """Compile ``func`` in nopython mode when numba is importable, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)
