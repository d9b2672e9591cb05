"""Hot loops, compiled when the extension is built, numpy otherwise.

Set ``BLINDCOMM_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _fallback

if os.environ.get("BLINDCOMM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

sbm_filter_batch = _impl.sbm_filter_batch
assign_nearest = _impl.assign_nearest

__all__ = ["BACKEND", "sbm_filter_batch", "assign_nearest", "_fallback"]
