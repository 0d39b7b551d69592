"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``CFMMW_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
reverse_delete = _kernels_py.reverse_delete

if os.environ.get("CFMMW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        reverse_delete = _compiled.reverse_delete
        BACKEND = "cython"

__all__ = ["reverse_delete", "BACKEND"]
