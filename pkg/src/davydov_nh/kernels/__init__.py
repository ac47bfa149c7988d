"""Kernel backend selection.

The hot inner kernels (coherent-state overlaps, metric/right-hand-side
assembly) exist twice: a Cython extension (``_core``) and a pure-numpy
fallback (``_ref``).  The compiled backend is preferred at import time;
set ``DAVYDOV_NH_PURE_PYTHON=1`` to force the fallback.  Run
``benchmarks/bench_kernels.py`` to compare the two.
"""

import os

from . import _ref

if os.environ.get("DAVYDOV_NH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _ref
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _ref

overlap_matrix = _impl.overlap_matrix
assemble_system = _impl.assemble_system


def backend_name():
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return _impl.BACKEND


def available_backends():
    """Mapping of backend name to its module, for benchmarking."""
    out = {"python": _ref}
    try:
        from . import _core
        out["compiled"] = _core
    except ImportError:
        pass
    return out
