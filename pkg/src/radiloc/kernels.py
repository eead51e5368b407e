"""Backend selection for the counting kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy/scipy fallback in ``_pykernels``. Set ``RADILOC_PURE_PYTHON=1`` to force
the fallback.
"""
import os

from . import _pykernels

if os.environ.get("RADILOC_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

glcm_counts = _impl.glcm_counts
glrlm_counts = _impl.glrlm_counts
glszm_counts = _impl.glszm_counts
ngtdm_stats = _impl.ngtdm_stats
gldm_counts = _impl.gldm_counts
label_components = _impl.label_components


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
