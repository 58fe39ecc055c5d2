"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``LECFDR_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("LECFDR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

reg_incomplete_beta = _impl.reg_incomplete_beta
route_search = _impl.route_search
