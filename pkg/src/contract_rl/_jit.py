"""Compile switch for the hot loops.

Kernels are written once in the numba-compatible subset of Python/numpy.
Set ``CONTRACT_RL_DISABLE_JIT=1`` before import to run them interpreted;
both paths draw from numpy's legacy global RNG, so seeded runs agree.
"""
import os

DISABLED = os.environ.get("CONTRACT_RL_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:
    import numba as nb
except ImportError:  # pragma: no cover
    nb = None

ENABLED = nb is not None and not DISABLED


def jit(fn=None, **kwd):
    """``numba.njit`` when enabled, identity otherwise."""
    kwd.setdefault("cache", True)

    def wrap(f):
        if not ENABLED:
            return f
        return nb.njit(**kwd)(f)

    return wrap(fn) if fn is not None else wrap


def backend():
    return "numba" if ENABLED else "python"
