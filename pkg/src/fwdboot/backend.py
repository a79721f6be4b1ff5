"""Select the numerical backend at import time.

The compiled extension is used when it was built. Setting the environment
variable ``FWDBOOT_PURE_PYTHON=1`` forces the NumPy implementation.
"""
import os

from . import _kernels_python

if os.environ.get("FWDBOOT_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_python
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _kernels_python
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
