"""Kernel backend selection.

The compiled extension is preferred when importable; setting the environment
variable SWARMFILTER_PURE_PYTHON=1 before import forces the numpy fallback.
use_backend() switches at runtime (mainly for benchmarks and tests).
"""
from __future__ import annotations

import os

from . import reference

_backends = {reference.NAME: reference}

if os.environ.get("SWARMFILTER_PURE_PYTHON", "") != "1":
    try:
        from . import _speedups
    except ImportError:
        pass
    else:
        _backends[_speedups.NAME] = _speedups

_active = _backends.get("compiled", reference)


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_backends))


def active_backend() -> str:
    return _active.NAME


def use_backend(name: str) -> str:
    """Select a backend by name ('compiled' or 'reference'); returns the name."""
    global _active
    try:
        _active = _backends[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} not available; choose from {available_backends()}"
        ) from None
    return _active.NAME


def spherical_project(dx, dy, dz, lat_scale, vert_scale, radial_lo, radial_hi):
    """Dispatch to the active backend; see kernels.reference for the contract."""
    return _active.spherical_project(
        dx, dy, dz, lat_scale, vert_scale, radial_lo, radial_hi
    )
