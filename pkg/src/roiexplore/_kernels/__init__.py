"""Kernel backend selection.

Imports the compiled extension when available, otherwise the pure-Python
fallback. ``ROIEXPLORE_PURE_PYTHON=1`` forces the fallback (useful for
debugging and for the backend-comparison benchmark).
"""

import os

if os.environ.get("ROIEXPLORE_PURE_PYTHON") == "1":
    from . import _pyfallback as impl
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pyfallback as impl

BACKEND = impl.BACKEND

__all__ = ["impl", "BACKEND"]
