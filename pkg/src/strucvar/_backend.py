"""Select the kernel implementation at import time.

The compiled extension is preferred; ``STRUCVAR_PURE=1`` forces the numpy
fallback, which is also used whenever the extension failed to build.
"""
import os

from . import _pykernels

if os.environ.get("STRUCVAR_PURE", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _pykernels
        BACKEND = "python"

python_kernels = _pykernels
