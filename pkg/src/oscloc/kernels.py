"""Backend selection for the per-frame hot loops.

The compiled Cython module is used when it imported cleanly; otherwise the
numpy reference implementations take over. Set OSCLOC_PURE_PYTHON=1 to force
the fallback (useful for benchmarking and debugging). Both backends produce
identical outputs; tests assert this exhaustively.
"""

import os

import numpy as np

from . import _kernels_py

_FORCE_PY = os.environ.get("OSCLOC_PURE_PYTHON", "") not in ("", "0")

if not _FORCE_PY:
    try:
        from . import _kernels_c as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"
else:
    _impl = _kernels_py
    BACKEND = "python"


def backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return BACKEND


def rule_labels(scores, tau: float, delta: float) -> np.ndarray:
    s = np.ascontiguousarray(scores, dtype=np.float64)
    return np.asarray(_impl.rule_labels(s, float(tau), float(delta)))


def causal_order(labels) -> np.ndarray:
    lab = np.ascontiguousarray(labels, dtype=np.int8)
    return np.asarray(_impl.causal_order(lab))


def ordered_decode_path(scores) -> np.ndarray:
    s = np.ascontiguousarray(scores, dtype=np.float64)
    return np.asarray(_impl.ordered_decode_path(s))
