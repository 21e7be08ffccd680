"""Hot numerical kernels with a compiled core and a NumPy fallback.

The Cython extension ``_core`` is preferred when it was built; otherwise the
pure-NumPy implementation in ``_numpy`` is used. Both expose the same three
functions with identical semantics:

    warp_bilinear(img, u, v)    -> warped image, edge-clamped sampling
    median_filter(a, radius)    -> windowed median, edge-replicated
    solve_warp(...)             -> in-place TV-L1 fix-point solve for one warp

Set ``CLOUDCAST_KERNELS=numpy`` to force the fallback (used by the benchmark
and the parity tests).
"""

import os

if os.environ.get("CLOUDCAST_KERNELS", "").lower() == "numpy":
    from . import _numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _numpy as _impl

        BACKEND = "numpy"

warp_bilinear = _impl.warp_bilinear
median_filter = _impl.median_filter
solve_warp = _impl.solve_warp


def backend() -> str:
    """Name of the kernel implementation selected at import."""
    return BACKEND
