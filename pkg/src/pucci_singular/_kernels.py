"""Kernel selection.

The compiled extension is used when it imports; otherwise, or when
``PUCCI_SINGULAR_PURE=1`` is set, the pure Python kernels are used.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PUCCI_SINGULAR_PURE") != "1":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

dopri5_ef = _impl.dopri5_ef
tridiag_solve = _impl.tridiag_solve
scheme_system = _impl.scheme_system

SPAN_REACHED = _pykernels.SPAN_REACHED
BLOW_UP = _pykernels.BLOW_UP
UNDERFLOW = _pykernels.UNDERFLOW
STEP_FAILURE = _pykernels.STEP_FAILURE
