"""Select the compiled kernel core, falling back to the numpy twin."""
import os

from . import _kernels_py


def _load():
    if os.environ.get("ANNIHILATION_PURE_PYTHON"):
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py
    return _kernels


kernels = _load()
BACKEND = kernels.BACKEND


def available_backends():
    """Kernel modules that can be used in this installation, by name."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
