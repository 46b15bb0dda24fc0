"""Kernel backend selection.

Imports the compiled quadric-fit kernel when available, otherwise the
vectorized numpy fallback.  Set SHRINKER_PURE_PYTHON=1 to force the fallback
(used by the benchmark and by CI environments without a compiler).
"""

import os

from . import _kernels_py

if os.environ.get("SHRINKER_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def quadric_fit(vertices, normals, t1, t2, indptr, indices):
    """Per-vertex 2-ring quadric coefficients [a, b, c, d, e]."""
    import numpy as np
    if BACKEND == "compiled":
        return _impl.quadric_fit(
            np.ascontiguousarray(vertices), np.ascontiguousarray(normals),
            np.ascontiguousarray(t1), np.ascontiguousarray(t2),
            np.ascontiguousarray(indptr, dtype=np.int64),
            np.ascontiguousarray(indices, dtype=np.int64))
    return _impl.quadric_fit(vertices, normals, t1, t2, indptr, indices)
