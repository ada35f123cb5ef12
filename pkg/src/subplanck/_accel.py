"""Backend selection for the hot kernels.

Every kernel in :mod:`subplanck.kernels` exists twice: a numba ``@njit``
version and a pure-numpy version.  The numba path is used when numba imports
and ``SUBPLANCK_DISABLE_NUMBA`` is not set to a truthy value.  The choice is
re-read at call time so tests and benchmarks can flip it with
:func:`set_backend`.
"""

import os
import warnings

_TRUTHY = ("1", "true", "yes", "on")

try:
    import numba

    HAVE_NUMBA = True
    # an old system TBB only triggers a fallback to another threading layer
    warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_forced = None


def _env_disabled():
    return os.environ.get("SUBPLANCK_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


def use_numba():
    """Return True when kernels should dispatch to the numba implementations."""
    if _forced is not None:
        return _forced == "numba"
    return HAVE_NUMBA and not _env_disabled()


def set_backend(name):
    """Force ``"numba"`` or ``"numpy"``; ``None`` restores env-driven selection."""
    global _forced
    if name not in (None, "numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _forced = name


def backend():
    return "numba" if use_numba() else "numpy"


def set_threads(n):
    """Set the numba worker count (no-op for the numpy backend)."""
    if n is None:
        env = os.environ.get("SUBPLANCK_THREADS")
        if not env:
            return
        n = int(env)
    if n < 1:
        raise ValueError("thread count must be positive")
    if HAVE_NUMBA:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def njit(*args, **kwargs):
    """``numba.njit`` with caching on; identity decorator without numba."""
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range
