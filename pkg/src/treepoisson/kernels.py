"""Backend selection for the hot tree recursions.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``TREEPOISSON_KERNELS=python`` is set, the pure-Python
module is used.  ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("TREEPOISSON_KERNELS", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "compiled"

zeta_sweeps = _impl.zeta_sweeps
green_matrix = _impl.green_matrix

__all__ = ["BACKEND", "zeta_sweeps", "green_matrix"]
