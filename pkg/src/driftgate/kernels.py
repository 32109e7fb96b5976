"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it was built; otherwise the
NumPy twin in ``_fallback`` is used. Set ``DRIFTGATE_PURE_PYTHON=1`` to force
the fallback.
"""
from __future__ import annotations

import os

from driftgate import _fallback

if os.environ.get("DRIFTGATE_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from driftgate import _kernels as _impl
    except ImportError:
        _impl = _fallback
        BACKEND = "python"
    else:
        BACKEND = "cython"

sweep_threshold = _impl.sweep_threshold
roc_auc_sorted = _impl.roc_auc_sorted
average_precision_sorted = _impl.average_precision_sorted
block_means = _impl.block_means


def available_backends() -> dict:
    """Map backend name to module, for benchmarks and parity tests."""
    out = {"python": _fallback}
    try:
        from driftgate import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
