"""Backend selection for the series kernels.

The compiled extension is used when importable; setting
``LOEWNERFLOW_PURE_PYTHON=1`` forces the NumPy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("LOEWNERFLOW_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _as_points(z):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=np.complex128)))


def p_series(z, k, b, order=0):
    return _impl.p_series(_as_points(z), np.ascontiguousarray(k, dtype=np.float64),
                          np.ascontiguousarray(b, dtype=np.float64), int(order))


def log_series(z, lam, coef, z0):
    return _impl.log_series(_as_points(z), np.ascontiguousarray(lam, dtype=np.float64),
                            np.ascontiguousarray(coef, dtype=np.complex128), complex(z0))


def loewner_rhs(w, s, k, b):
    return _impl.loewner_rhs(complex(w), float(s), k, b)


def backends():
    """Return the available implementations keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        out["cython"] = _compiled
    return out
