"""Backend selection for the numeric kernels.

The compiled extension is used when it was built; setting
``FAIRSELECT_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

if os.environ.get("FAIRSELECT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

hidden_forward = _impl.hidden_forward
hidden_backward = _impl.hidden_backward
output_forward = _impl.output_forward
output_backward = _impl.output_backward
adam_update = _impl.adam_update
PROB_FLOOR = 1e-12

__all__ = [
    "BACKEND",
    "hidden_forward",
    "hidden_backward",
    "output_forward",
    "output_backward",
    "adam_update",
]
