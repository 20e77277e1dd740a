"""Kernel backend selection.

Hot inner loops (convolution, rank filtering, morphology, component
labeling, split search) exist twice: a numba @njit build and a pure-numpy
build. The env var LUNGPREP_BACKEND picks one:

    LUNGPREP_BACKEND=numba   force the jitted kernels (error if numba missing)
    LUNGPREP_BACKEND=numpy   force the vectorized numpy fallbacks
    unset                    numba when importable, numpy otherwise

Both backends compute identical results; see benchmarks/bench_kernels.py
for the speed comparison.
"""

import os

_ENV_VAR = "LUNGPREP_BACKEND"
_VALID = ("numba", "numpy")


def _numba_importable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _select() -> str:
    forced = os.environ.get(_ENV_VAR, "").strip().lower()
    if forced == "":
        return "numba" if _numba_importable() else "numpy"
    if forced not in _VALID:
        raise ValueError(
            f"{_ENV_VAR} must be one of {_VALID}, got {forced!r}"
        )
    if forced == "numba" and not _numba_importable():
        raise ImportError(f"{_ENV_VAR}=numba but numba is not installed")
    return forced


_ACTIVE = _select()


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _ACTIVE
