"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``NEGREFRACT_PURE_PYTHON=1`` to force the numpy path.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
envelope = _pykernels.envelope
best_other = _pykernels.best_other

if os.environ.get("NEGREFRACT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        envelope = _ckernels.envelope
        best_other = _ckernels.best_other
