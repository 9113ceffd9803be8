"""Backend selection for the hot kernels.

The numba backend is used when numba imports cleanly and the environment
variable ``TORUSRGG_BACKEND`` is unset or equal to ``"numba"``. Setting it to
``"numpy"`` forces the pure-numpy fallbacks, which produce bit-identical
results (all random draws happen in numpy before any kernel runs).
"""

from __future__ import annotations

import os

ENV_BACKEND = "TORUSRGG_BACKEND"
ENV_THREADS = "TORUSRGG_THREADS"

try:  # pragma: no cover - exercised implicitly
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False


def requested_backend() -> str:
    name = os.environ.get(ENV_BACKEND, "numba").strip().lower() or "numba"
    if name not in ("numba", "numpy"):
        raise ValueError(f"{ENV_BACKEND} must be 'numba' or 'numpy', got {name!r}")
    return name


USE_NUMBA = HAVE_NUMBA and requested_backend() == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise an identity decorator.

    Kernels are always compiled when numba is present so the benchmark can
    compare both paths in one process; dispatch decides which one runs.
    """
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def default_threads() -> int:
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{ENV_THREADS} must be a positive integer") from exc
    if value < 1:
        raise ValueError(f"{ENV_THREADS} must be a positive integer")
    return value
