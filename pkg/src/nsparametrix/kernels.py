"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting the environment
variable ``NSPARAMETRIX_PURE=1`` forces the numpy fallback.
"""
import os

from . import _fallback

if os.environ.get("NSPARAMETRIX_PURE", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

trig_eval_2d = _impl.trig_eval_2d
trig_eval_3d = _impl.trig_eval_3d
gaussian_average_2d = _impl.gaussian_average_2d
gaussian_average_3d = _impl.gaussian_average_3d

__all__ = ["BACKEND", "trig_eval_2d", "trig_eval_3d",
           "gaussian_average_2d", "gaussian_average_3d"]
