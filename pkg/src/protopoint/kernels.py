"""Kernel backend selection.

Two implementations exist for every kernel: a compiled extension and a
numpy fallback with identical semantics. Profiling (benchmarks/
bench_kernels.py) shows the split: BLAS-backed numpy wins the GEMM-shaped
dense reductions by an order of magnitude, while the compiled loops win
the grid walks (component labelling ~45x, window maxima ~5x). The default
"mixed" dispatch therefore routes dense reductions through numpy and grid
walks through the extension.

Set ``PROTOPOINT_BACKEND`` to override: ``numpy`` (no compiled code),
``compiled`` (extension for everything; raises if unbuilt), or ``mixed`` /
``auto`` (the default; degrades to pure numpy when the extension is
missing).
"""

from __future__ import annotations

import os

from . import kernels_numpy

_DENSE = ("max_sim_map", "best_match", "row_max_offdiag")
_GRID = ("label_components", "window_max")

_requested = os.environ.get("PROTOPOINT_BACKEND", "auto").lower()
if _requested not in ("auto", "mixed", "compiled", "numpy"):
    raise RuntimeError(
        f"PROTOPOINT_BACKEND must be auto, mixed, compiled or numpy, "
        f"got {_requested!r}"
    )

_compiled = None
if _requested in ("auto", "mixed", "compiled"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError(
                "PROTOPOINT_BACKEND=compiled but the extension is not built"
            )

if _requested == "numpy" or _compiled is None:
    BACKEND = "numpy"
    _dense_impl = _grid_impl = kernels_numpy
elif _requested == "compiled":
    BACKEND = "compiled"
    _dense_impl = _grid_impl = _compiled
else:
    BACKEND = "mixed"
    _dense_impl = kernels_numpy
    _grid_impl = _compiled


def backend_name() -> str:
    return BACKEND


max_sim_map = _dense_impl.max_sim_map
best_match = _dense_impl.best_match
row_max_offdiag = _dense_impl.row_max_offdiag
label_components = _grid_impl.label_components
window_max = _grid_impl.window_max
