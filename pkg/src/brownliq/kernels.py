"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
kernels take over.  Set ``BROWNLIQ_BACKEND=python`` to force the fallback.
"""
import os

from brownliq import _pykernels

python = _pykernels

try:
    from brownliq import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("BROWNLIQ_BACKEND", "").lower() != "python":
    active = compiled
    BACKEND = "cython"
else:
    active = _pykernels
    BACKEND = "python"


def get(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); default active."""
    if name is None:
        return active
    if name == "python":
        return _pykernels
    if name == "cython":
        if compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
