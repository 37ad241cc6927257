"""Kernel backend selection.

Hot kernels are written once as plain Python loops and compiled with
``numba.njit`` when numba is importable. Setting ``FINSLERKIT_DISABLE_NUMBA=1``
(or any of ``true``/``yes``) forces the pure-numpy fallback path instead.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}


def numba_requested() -> bool:
    return os.environ.get("FINSLERKIT_DISABLE_NUMBA", "").strip().lower() not in _TRUTHY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _numba = None

USE_NUMBA = _numba is not None and numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba if available, else return it unchanged."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, fastmath=False)(func)


def max_workers() -> int:
    """Worker cap from ``FINSLERKIT_THREADS`` (default 1)."""
    raw = os.environ.get("FINSLERKIT_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)
