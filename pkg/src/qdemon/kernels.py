"""Backend selection for the batched reconstruction kernels.

The compiled module is used when it was built; setting ``QDEMON_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("QDEMON_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        pass

assemble_density = _impl.assemble_density
project_spectrum = _impl.project_spectrum
entropy_bits = _impl.entropy_bits
pure_overlap = _impl.pure_overlap


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
