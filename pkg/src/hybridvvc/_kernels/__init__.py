"""Hot numerical kernels.

The compiled extension is preferred; the numpy implementation is used when the
extension is not built or when ``HYBRIDVVC_PURE_PYTHON=1`` is set.
"""
import os

from . import _pf_py

BACKEND = "python"
newton_solve = _pf_py.newton_solve

if os.environ.get("HYBRIDVVC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _pf_core
    except ImportError:
        pass
    else:
        newton_solve = _pf_core.newton_solve
        BACKEND = "cython"

__all__ = ["BACKEND", "newton_solve"]
