"""Kernel backend selection.

The compiled extension is used when it imports; ``FCBIO_BACKEND=python``
forces the numpy fallback. Call sites look up ``_backend.kernels`` at call
time, so :func:`set_backend` takes effect immediately.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_AVAILABLE = {"python": _pykernels}
if _ckernels is not None:
    _AVAILABLE["compiled"] = _ckernels


def available() -> list[str]:
    return sorted(_AVAILABLE)


def set_backend(name: str):
    global kernels
    if name not in _AVAILABLE:
        raise ValueError(f"backend {name!r} unavailable; have {available()}")
    kernels = _AVAILABLE[name]
    return kernels


def current() -> str:
    return kernels.BACKEND


_requested = os.environ.get("FCBIO_BACKEND", "").strip().lower()
if _requested in _AVAILABLE:
    kernels = _AVAILABLE[_requested]
else:
    kernels = _ckernels if _ckernels is not None else _pykernels
