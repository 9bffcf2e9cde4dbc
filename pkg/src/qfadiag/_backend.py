"""Pick the compiled kernels when available; ``QFADIAG_PURE_PYTHON=1`` forces numpy."""

import os

from qfadiag import _kernels_py

kernels_py = _kernels_py

if os.environ.get("QFADIAG_PURE_PYTHON") == "1":
    kernels = _kernels_py
    kernels_ext = None
else:
    try:
        from qfadiag import _kernels as kernels_ext
    except ImportError:  # extension not built
        kernels_ext = None
    kernels = kernels_ext if kernels_ext is not None else _kernels_py

BACKEND = "cython" if kernels is kernels_ext else "python"
