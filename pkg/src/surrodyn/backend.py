"""Compute-lane selection and BLAS thread pinning.

SURRODYN_BACKEND=numba|numpy forces a lane; unset (or "auto") prefers the
jitted lane when numba imports cleanly and falls back to pure numpy.

The workloads here are long loops over small-matrix GEMMs, where a threaded
BLAS loses an order of magnitude to pool synchronization, so the BLAS is
pinned to SURRODYN_BLAS_THREADS (default 1) at import.
"""

from __future__ import annotations

import os


def _pin_blas():
    raw = os.environ.get("SURRODYN_BLAS_THREADS", "1").strip()
    if raw in ("", "0", "keep"):
        return None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(limits=int(raw), user_api="blas")


def _select() -> str:
    requested = os.environ.get("SURRODYN_BACKEND", "auto").strip().lower() or "auto"
    if requested == "auto":
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
        return "numba"
    if requested in ("numba", "numpy"):
        return requested
    raise ValueError(
        f"SURRODYN_BACKEND must be 'numba', 'numpy' or 'auto', got {requested!r}"
    )


BACKEND = _select()

if BACKEND == "numba":
    from . import kernels_numba as kernels
else:
    from . import kernels_numpy as kernels

# numpy (and its BLAS) is loaded by the kernels import above; pin afterwards
_BLAS_LIMIT = _pin_blas()  # held for the process lifetime

__all__ = ["BACKEND", "kernels"]
