"""Kernel backend selection.

The package ships two implementations of its hot kernels: numba-jitted loops
(_kernels_numba) and pure numpy (_kernels_numpy). The active backend is chosen
once, lazily, from the GJSD_BACKEND environment variable:

    GJSD_BACKEND=numba   force the jitted kernels (error if numba is missing)
    GJSD_BACKEND=numpy   force the pure-numpy fallback
    unset                numba if importable, else numpy

Both backends are deterministic run-to-run; see benchmarks/bench_kernels.py
for a speed comparison.
"""

import contextlib
import os

from .errors import InputError

_ENV_VAR = "GJSD_BACKEND"
_VALID = ("numba", "numpy")
_active = None


def _resolve(name):
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    if name == "numba":
        try:
            from . import _kernels_numba
        except ImportError as exc:
            raise InputError(
                "GJSD_BACKEND=numba requested but numba is not importable"
            ) from exc
        return _kernels_numba
    raise InputError(
        f"invalid {_ENV_VAR} value {name!r}; expected one of {_VALID}"
    )


def get_kernels():
    """Return the active kernel module, resolving it on first use."""
    global _active
    if _active is None:
        name = os.environ.get(_ENV_VAR)
        if name is not None:
            _active = _resolve(name.strip().lower())
        else:
            try:
                from . import _kernels_numba as mod
            except ImportError:
                from . import _kernels_numpy as mod
            _active = mod
    return _active


def active_backend_name():
    return get_kernels().NAME


@contextlib.contextmanager
def use_backend(name):
    """Force a backend by name ("numba" or "numpy") within a context.

    Intended for tests and benchmarks; restores the previous selection on
    exit. Yields the selected kernel module.
    """
    global _active
    previous = _active
    _active = _resolve(name)
    try:
        yield _active
    finally:
        _active = previous


def _reset_for_tests():
    """Drop the cached selection so the env var is consulted again."""
    global _active
    _active = None
