"""Numba acceleration switch.

Hot kernels (model vector fields, Jacobians, stepper cores) are compiled
with numba by default.  Setting ``ISOSLOW_DISABLE_NUMBA=1`` selects the
pure-numpy fallback: the very same source functions run uncompiled, so both
paths share one implementation.  ``benchmarks/bench_backends.py`` compares
the two.
"""
from __future__ import annotations

import os


def _env_disabled() -> bool:
    return os.environ.get("ISOSLOW_DISABLE_NUMBA", "").strip().lower() in {
        "1", "true", "yes", "on",
    }


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dep, but keep the fallback honest
    _numba = None

USING_NUMBA: bool = _numba is not None and not _env_disabled()


def maybe_njit(*args, **kwargs):
    """``@njit`` when acceleration is on, identity decorator otherwise.

    ``cache=True`` is only legal for module-level functions; factories that
    close over arrays must not pass it.
    """

    def wrap(fn):
        if not USING_NUMBA:
            return fn
        return _numba.njit(fn, **kwargs)

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap


def py_func(fn):
    """Uncompiled python function behind a dispatcher (fn itself if plain)."""
    return getattr(fn, "py_func", fn)


def is_dispatcher(fn) -> bool:
    return hasattr(fn, "py_func") and hasattr(fn, "signatures")
