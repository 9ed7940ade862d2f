"""Pick the compiled kernels when available, else the numpy fallback.

Set ``MULTIDEP_BACKEND=python`` to force the fallback.
"""

import os

from . import _pykernels

KIND_PRODUCT = _pykernels.KIND_PRODUCT
KIND_TOTAL = _pykernels.KIND_TOTAL
KIND_SYMMETRIC = _pykernels.KIND_SYMMETRIC

_compiled = None
if os.environ.get("MULTIDEP_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

kernels = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"


def available_backends():
    """Map of backend name to kernel module, for tests and benchmarks."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["cython"] = _ckernels
    return out
