"""Backend selection for the hot kernels.

Set ``BOOSTVI_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag only
changes how numbers are computed, never what is computed.
"""
import os

_truthy = {"1", "true", "yes", "on"}

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("BOOSTVI_DISABLE_NUMBA", "").lower() not in _truthy

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def njit(func):
    """``numba.njit`` with the package defaults, or the identity without numba."""
    if not HAS_NUMBA:  # pragma: no cover
        return func
    return numba.njit(**numba_default)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
