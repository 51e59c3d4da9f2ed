"""Backend selection for the axis kernels.

The compiled Cython module is used when it was built; otherwise the
NumPy/SciPy fallback is imported.  Set ``IGAMG_BACKEND=python`` to force
the fallback.
"""
import os

from . import _kernels_py

_python = _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("IGAMG_BACKEND", "").lower() != "python":
    _active = _compiled
    BACKEND = "cython"
else:
    _active = _python
    BACKEND = "python"


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_backend(name):
    if name == "python":
        return _python
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name):
    """Switch the process-wide backend (used by the benchmark)."""
    global _active, BACKEND
    _active = get_backend(name)
    BACKEND = name


def band_matvec(ab, x):
    return _active.band_matvec(ab, x)


def band_cho_solve(cb, x):
    return _active.band_cho_solve(cb, x)


def csr_matvec(indptr, indices, data, nrows, x):
    return _active.csr_matvec(indptr, indices, data, nrows, x)
