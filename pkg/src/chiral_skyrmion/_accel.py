"""Backend selection for the stencil kernels.

The numba path is used when numba imports cleanly, unless the environment
variable ``CHIRAL_SKYRMION_BACKEND`` is set to ``numpy``.  Both paths compute
the same per-node quantities in the same floating-point order; reductions are
always done by numpy afterwards.
"""

import os
import warnings

# old system TBB: numba falls back to another threading layer, nothing to act on
warnings.filterwarnings("ignore", message="The TBB threading layer")

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

ENV_VAR = "CHIRAL_SKYRMION_BACKEND"
NUMBA_AVAILABLE = numba is not None


def _initial_backend():
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested in ("numpy", "python", "off", "0"):
        return "numpy"
    if requested == "numba" and not NUMBA_AVAILABLE:
        raise ImportError(f"{ENV_VAR}=numba but numba is not installed")
    return "numba" if NUMBA_AVAILABLE else "numpy"


_backend = _initial_backend()


def njit(f=None, **options):
    """``numba.njit`` when numba is present, identity otherwise."""
    options.setdefault("cache", True)
    if numba is None:
        return f if f is not None else (lambda g: g)
    if f is None:
        return lambda g: numba.njit(g, **options)
    return numba.njit(f, **options)


def get_backend():
    return _backend


def set_backend(name):
    """Switch between ``"numba"`` and ``"numpy"`` at runtime."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise ImportError("numba is not installed")
    _backend = name


def use_numba():
    return _backend == "numba"


def set_threads(n):
    if numba is not None and n:
        numba.set_num_threads(int(n))
