"""Kernel backend selection: numba-accelerated loops vs pure numpy.

The hot inner loops (per-replication statistic evaluation) have two
implementations.  Selection order:

1. ``SPARSE_UNIF_BACKEND=numpy`` forces the pure-numpy path.
2. ``SPARSE_UNIF_BACKEND=numba`` forces numba (raises if not importable).
3. Unset: numba when importable, numpy otherwise.

Both paths compute the same statistics; they may differ in the last few ulps
because summation order differs.  Within one backend, results are bitwise
deterministic.  ``benchmarks/bench_backends.py`` compares their throughput.
"""

from __future__ import annotations

import os

from .errors import ConfigError

_ENV_VAR = "SPARSE_UNIF_BACKEND"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _resolve_backend() -> str:
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        raise ConfigError(
            f"{_ENV_VAR} must be 'numba' or 'numpy', got {requested!r}"
        )
    if requested == "numba" and not HAVE_NUMBA:
        raise ConfigError(f"{_ENV_VAR}=numba but numba is not importable")
    if requested == "":
        return "numba" if HAVE_NUMBA else "numpy"
    return requested


BACKEND = _resolve_backend()
USE_NUMBA = BACKEND == "numba"


def njit(func):
    """Apply ``numba.njit(cache=True)``; identity when numba is unavailable."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
