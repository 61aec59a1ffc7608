"""Backend selection for the hot kernels.

Every kernel in the package has a numba ``@njit`` version and a pure-numpy
twin. The numba path is used when numba imports cleanly and the environment
variable ``GRAPHKAN_DISABLE_NUMBA`` is unset (or ``0``). ``set_backend`` lets
tests and benchmarks flip the choice at runtime.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

ENV_FLAG = "GRAPHKAN_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(ENV_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if HAS_NUMBA and not _env_disabled() else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with caching on; identity decorator when numba is absent."""
    if not HAS_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def get_backend():
    return _backend


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


def use_numba():
    return _backend == "numba"
