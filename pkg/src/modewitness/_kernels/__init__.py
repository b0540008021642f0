"""Hot kernels with a compiled core and a numpy fallback.

The Cython extension is used when it was built and importable; set
``MODEWITNESS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pycore

BACKEND = "python"
if not os.environ.get("MODEWITNESS_PURE_PYTHON"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pycore
else:
    _impl = _pycore

lift_block = _impl.lift_block
hellinger_shift = _impl.hellinger_shift

__all__ = ["BACKEND", "lift_block", "hellinger_shift"]
