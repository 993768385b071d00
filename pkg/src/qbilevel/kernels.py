"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``QBILEVEL_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("QBILEVEL_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def implementations():
    """All importable kernel modules, keyed by name."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled
    except ImportError:
        return found
    found["cython"] = _compiled
    return found


apply_1q = _impl.apply_1q
apply_cnot = _impl.apply_cnot


def circuit_z(enc, ry, rz, impl=None):
    """Batched per-qubit <Z>; see ``_kernels_py.circuit_z`` for shapes."""
    impl = impl or _impl
    return impl.circuit_z(
        np.ascontiguousarray(enc, dtype=np.float64),
        np.ascontiguousarray(ry, dtype=np.float64),
        np.ascontiguousarray(rz, dtype=np.float64),
    )
