"""Hot tree kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imported cleanly, unless the
``CLFAUDIT_PURE_PYTHON`` environment variable is set to a non-empty value
other than ``0``.
"""
import os

from . import _pykernels

_force_py = os.environ.get("CLFAUDIT_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

best_split = _impl.best_split
forest_predict = _impl.forest_predict
tree_expectations = _impl.tree_expectations


def backends():
    """Mapping of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
