"""Select the compiled core when available, else the pure-Python one."""

import os

try:
    if os.environ.get("SHIFTPERT_PURE_PYTHON"):
        raise ImportError
    from . import _ccore as core
    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build
    from . import _pycore as core
    BACKEND = "python"

__all__ = ["core", "BACKEND"]
