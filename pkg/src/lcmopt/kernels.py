"""Backend selection for the hot kernels.

The compiled module is used when it imports; otherwise (or when the
``LCMOPT_PURE_PYTHON`` environment variable is set to a non-empty value) the
numpy fallback is used. ``BACKEND`` names the active one.
"""

import os

from . import _pykernels

if os.environ.get("LCMOPT_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

project_blocks = _impl.project_blocks
component_densities = _impl.component_densities
loglik = _impl.loglik
loglik_grad = _impl.loglik_grad

DENSITY_FLOOR = _pykernels.DENSITY_FLOOR
GRADIENT_FLOOR = _pykernels.GRADIENT_FLOOR


def available_backends():
    """Return ``{name: module}`` for every importable backend."""
    backends = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends
