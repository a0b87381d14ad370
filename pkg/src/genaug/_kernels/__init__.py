"""Kernel backend selection.

Imports the compiled extension when available, otherwise falls back to the
pure-numpy implementation. Set GENAUG_KERNEL_BACKEND=python or =cython to
force a choice (forcing cython raises if the extension is missing).
Both backends are bit-identical; see tests/test_kernels_parity.py.
"""

from __future__ import annotations

import os

from genaug._kernels import numpy_backend

_forced = os.environ.get("GENAUG_KERNEL_BACKEND", "").lower()

if _forced == "python":
    _impl = numpy_backend
    BACKEND = "python"
else:
    try:
        from genaug._kernels import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = numpy_backend
        BACKEND = "python"

correlate_sym_h = _impl.correlate_sym_h
correlate_sym_v = _impl.correlate_sym_v
correlate_antisym_h = _impl.correlate_antisym_h
correlate_antisym_v = _impl.correlate_antisym_v
nms_mask = _impl.nms_mask
hysteresis = _impl.hysteresis

__all__ = [
    "BACKEND",
    "correlate_sym_h",
    "correlate_sym_v",
    "correlate_antisym_h",
    "correlate_antisym_v",
    "nms_mask",
    "hysteresis",
    "numpy_backend",
]
