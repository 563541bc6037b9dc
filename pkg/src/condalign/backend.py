"""Gram-kernel backend selection.

The env var ``CONDALIGN_BACKEND`` picks the implementation of the hot
kernels:

    CONDALIGN_BACKEND=numba   force the jitted path (error if numba missing)
    CONDALIGN_BACKEND=numpy   force the pure-numpy path
    (unset)                   numba when importable, numpy otherwise

Resolution happens once at import. Either path is deterministic run to
run; the two paths agree to round-off but are not bit-identical to each
other, so a reproducibility contract holds per backend.
"""

import os

from .errors import ConfigError

_ENV_VAR = "CONDALIGN_BACKEND"


def _resolve():
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ConfigError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        from . import _gram_numpy as impl

        return "numpy", impl
    try:
        from . import _gram_numba as impl

        return "numba", impl
    except ImportError:
        if choice == "numba":
            raise ConfigError("CONDALIGN_BACKEND=numba but numba is not importable")
        from . import _gram_numpy as impl

        return "numpy", impl


_NAME, _IMPL = _resolve()

mixture_gram = _IMPL.mixture_gram
mixture_gram_gradient = _IMPL.mixture_gram_gradient


def active_backend() -> str:
    """Name of the backend selected at import time ('numba' or 'numpy')."""
    return _NAME
