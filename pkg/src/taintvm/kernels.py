"""Hot-path kernels, compiled when available.

The Cython extension ``taintvm._ckernels`` is preferred. Setting the
environment variable ``TAINTVM_PURE_PYTHON=1`` before import forces the
pure-Python implementation, which is also used when the extension was not
built.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("TAINTVM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
IntervalMap = _impl.IntervalMap
scan_jumpdests = _impl.scan_jumpdests


def available_backends() -> dict:
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
