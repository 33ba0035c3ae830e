"""Kernel selection: the compiled extension when importable, numpy otherwise.

``GRIDSHIELD_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("GRIDSHIELD_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "numpy" if _impl is _kernels_py else "cython"

fixpoint_sweeps = _impl.fixpoint_sweeps
action_masks = _impl.action_masks
