"""Kernel backend selection.

The hot inner loops (value sweeps, flow loading, stencil products, edge
integrals) ship in two implementations: numba-compiled loops and pure-numpy
array code. The active backend is picked once, from the DENSEROUTE_BACKEND
environment variable ("numba" or "numpy"); numba is the default whenever it
imports. Both backends run the same arithmetic in the same association order,
so the sweep, loading and stencil kernels agree bitwise; the edge-integral
kernels agree to floating-point rounding.
"""

from __future__ import annotations

import os

ENV_VAR = "DENSEROUTE_BACKEND"

_active: str | None = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _detect() -> str:
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice == "":
        return "numba" if numba_available() else "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(
            f"{ENV_VAR}={choice!r} not understood; use 'numba' or 'numpy'"
        )
    if choice == "numba" and not numba_available():
        raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
    return choice


def active_backend() -> str:
    """Name of the backend in use ("numba" or "numpy")."""
    global _active
    if _active is None:
        _active = _detect()
    return _active


def set_backend(name: str) -> None:
    """Force a backend (tests and benchmarks; normal use goes via the env var)."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    global _active
    _active = name
