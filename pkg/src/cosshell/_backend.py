"""Select the density kernel implementation at import time.

The compiled extension is used when it is importable; set
``COSSHELL_BACKEND=python`` to force the NumPy fallback.
"""
import os

from . import _kernels_py

_available = {"python": _kernels_py}
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _available["cython"] = _ckernels

_requested = os.environ.get("COSSHELL_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "cython"):
    raise ImportError(f"unknown COSSHELL_BACKEND={_requested!r}")
if _requested == "python" or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"
kernels = _available[BACKEND]


def available_backends():
    return sorted(_available)


def get_kernels(name=None):
    """Return the kernel module ``name`` (default: the active one)."""
    if name is None:
        return kernels
    try:
        return _available[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}") from None
