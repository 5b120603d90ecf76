"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise, or when
``MABD_PURE_PYTHON=1``, the numpy implementations in :mod:`mabd._fallback`
are used. Both expose the same four functions.
"""
import os

from mabd import _fallback
from mabd._fallback import NearSingular  # noqa: F401

_force_python = os.environ.get("MABD_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure-python backend requested")
    from mabd import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

polar_rotation = _impl.polar_rotation
corot_solve = _impl.corot_solve
corot_solve_lenpres = _impl.corot_solve_lenpres
block_thomas = _impl.block_thomas


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _fallback}
    try:
        from mabd import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
