"""Honor the EPGP_THREADS environment variable.

EPGP_THREADS caps the number of threads used by the BLAS/LAPACK backends.
The env-var route only works when set before numpy first loads its BLAS, so
this module is imported at the very top of the package __init__; when
threadpoolctl is available the cap is also applied to already-loaded pools.
"""

from __future__ import annotations

import os

_controller = None


def apply_thread_cap() -> int | None:
    """Apply the EPGP_THREADS cap, returning the cap or None if unset."""
    raw = os.environ.get("EPGP_THREADS")
    if not raw:
        return None
    try:
        cap = int(raw)
    except ValueError:
        return None
    if cap < 1:
        return None
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "BLIS_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, str(cap))
    global _controller
    try:
        import threadpoolctl

        # Keep a reference: the limit is undone when the object is collected.
        _controller = threadpoolctl.threadpool_limits(limits=cap)
    except ImportError:
        pass
    return cap


apply_thread_cap()
