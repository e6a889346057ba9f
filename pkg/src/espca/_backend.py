"""Select between the numba kernels and the pure-numpy fallback.

The choice is read once from ``ESPCA_BACKEND`` (``numba`` or ``numpy``).
When unset, numba is used if it imports.
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_VALID = ("numba", "numpy")


def _resolve():
    choice = os.environ.get("ESPCA_BACKEND", "").strip().lower()
    if not choice:
        return "numba" if HAS_NUMBA else "numpy"
    if choice not in _VALID:
        raise ValueError(f"ESPCA_BACKEND must be one of {_VALID}, got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise ImportError("ESPCA_BACKEND=numba but numba is not installed")
    return choice


BACKEND = _resolve()


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or identity when numba is absent."""
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
