"""Kernel backend selection.

MGRID_BACKEND=numba (default) uses the JIT kernels; MGRID_BACKEND=numpy
forces the pure-numpy fallback.  Falls back to numpy automatically when
numba is not importable.
"""

import logging
import os

log = logging.getLogger("mgrid")

_VALID = ("numba", "numpy")


def backend_name() -> str:
    name = os.environ.get("MGRID_BACKEND", "numba").strip().lower()
    if name not in _VALID:
        raise ValueError(
            f"MGRID_BACKEND must be one of {_VALID}, got {name!r}")
    return name


def get_kernels(name: str | None = None):
    """Return the kernel module for ``name`` (or the env-selected one)."""
    name = name or backend_name()
    if name == "numba":
        try:
            from . import _kernels_numba
            return _kernels_numba
        except ImportError:
            log.warning("numba unavailable, falling back to numpy kernels")
    from . import _kernels_numpy
    return _kernels_numpy
