"""Backend switch for the hot kernels.

Set ``ASYM_SIM_NUMBA=0`` before import to run every kernel through the
pure-numpy path. Both paths share the same counter-based random stream,
so they consume identical random numbers.
"""

import os

_FLAG = os.environ.get("ASYM_SIM_NUMBA", "1").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if USE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n: int | None) -> None:
    """Cap numba's worker pool. No-op on the numpy path."""
    if USE_NUMBA and n:
        _numba.set_num_threads(max(1, min(int(n), _numba.config.NUMBA_NUM_THREADS)))
