"""Backend selection for the compiled kernels.

``D2DFD_BACKEND=numpy`` forces the pure-numpy paths; ``numba`` (the default
when numba imports) uses the ``@njit`` kernels. Read once at import time.
"""

import os

_requested = os.environ.get("D2DFD_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"D2DFD_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with cache on, or an identity decorator without numba."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f
