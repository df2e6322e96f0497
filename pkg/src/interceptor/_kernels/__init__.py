"""Numeric kernel backend.

Prefers the compiled extension ``_core`` and falls back to the pure-Python
``_core_py`` with identical semantics. Set ``INTERCEPTOR_KERNELS=py`` to
force the fallback (useful for benchmarking and debugging).
"""

import os

if os.environ.get("INTERCEPTOR_KERNELS", "").lower() == "py":
    from . import _core_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _core_py as _impl
        BACKEND = "python"

WORDS = _impl.WORDS
WORD_SEGMENTS = _impl.WORD_SEGMENTS
dubins_all = _impl.dubins_all
dubins_best = _impl.dubins_best
dubins_sample = _impl.dubins_sample
roll_arc = _impl.roll_arc
rk4_propagate = _impl.rk4_propagate
poly_contains = _impl.poly_contains
poly_signed_distance = _impl.poly_signed_distance
heuristic_best = _impl.heuristic_best
expand_arcs = _impl.expand_arcs
batch_clearance = _impl.batch_clearance
dp_core = _impl.dp_core

__all__ = [
    "BACKEND", "WORDS", "WORD_SEGMENTS", "dubins_all", "dubins_best",
    "dubins_sample", "roll_arc", "rk4_propagate", "poly_contains",
    "poly_signed_distance", "heuristic_best", "expand_arcs",
    "batch_clearance", "dp_core",
]
