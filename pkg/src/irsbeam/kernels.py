"""Power-control kernels, compiled when available.

``BACKEND`` is ``"compiled"`` or ``"python"``.  Setting
``IRSBEAM_PURE_PYTHON=1`` forces the numpy implementation.
"""
import os

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("IRSBEAM_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py

min_power_batch = _impl.min_power_batch
maxmin_power_batch = _impl.maxmin_power_batch
scaled_sinr_batch = _impl.scaled_sinr_batch

__all__ = ["BACKEND", "min_power_batch", "maxmin_power_batch", "scaled_sinr_batch"]
