"""Hot inner loops, compiled with numba when available.

Set ``SPARSE_RP_PURE_NUMPY=1`` before import to force the numpy
implementations (useful for debugging and for the backend benchmark).
Both backends consume the same pre-drawn random arrays, so switching
never changes which random numbers a computation sees.
"""

from __future__ import annotations

import importlib
import os

from . import _numpy

_force_numpy = os.environ.get("SPARSE_RP_PURE_NUMPY", "").strip() not in ("", "0")

_impl = _numpy
if not _force_numpy:
    try:
        _impl = importlib.import_module(f"{__name__}._numba")
    except ImportError:  # numba missing or broken on this platform
        pass

BACKEND = "numba" if _impl is not _numpy else "numpy"

csc_project = _impl.csc_project
floyd_abs_dot = _impl.floyd_abs_dot
pair_histogram = _impl.pair_histogram
dcd_svm = _impl.dcd_svm
pegasos_svm = _impl.pegasos_svm

__all__ = [
    "BACKEND",
    "csc_project",
    "dcd_svm",
    "floyd_abs_dot",
    "pair_histogram",
    "pegasos_svm",
]
