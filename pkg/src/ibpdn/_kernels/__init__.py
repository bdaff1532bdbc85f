"""Douglas-Rachford inner kernels with a compiled fast path.

The Cython extension ``_core`` is used when it has been built; otherwise
the numpy implementation in ``_pure`` is used. Setting the environment
variable ``IBPDN_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pure

BACKEND = "python"
if os.environ.get("IBPDN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:  # extension not compiled
        _impl = _pure
else:
    _impl = _pure

soft_threshold = _impl.soft_threshold
secular_root = _impl.secular_root
tube_coefficients = _impl.tube_coefficients
project = _impl.project
dr_loop = _impl.dr_loop

__all__ = ["BACKEND", "soft_threshold", "secular_root", "tube_coefficients", "project", "dr_loop"]
