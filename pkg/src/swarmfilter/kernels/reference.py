"""Pure-numpy kernel for the spherical block update.

Same contract as the compiled extension; used when the extension is missing
or explicitly disabled.
"""
from __future__ import annotations

import numpy as np

NAME = "reference"


def spherical_project(dx, dy, dz, lat_scale, vert_scale, radial_lo, radial_hi):
    """Closed-form minimizer of the per-sample penalty over (azimuth, polar, radial).

    For each input vector (dx, dy, dz) this finds the angles and the clamped
    radial factor minimizing

        (dx - lat t cos(az) sin(pol))^2 + (dy - lat t sin(az) sin(pol))^2
        + (dz - vert t cos(pol))^2,   t in [radial_lo, radial_hi]

    and returns (azimuth, polar, radial, tx, ty, tz) where (tx, ty, tz) is
    the minimizing point on the scaled sphere.  All arrays are flat float64
    of equal length.  An all-zero input maps to azimuth 0, polar pi/2 and the
    lower radial bound.
    """
    dx = np.ascontiguousarray(dx, dtype=float)
    dy = np.ascontiguousarray(dy, dtype=float)
    dz = np.ascontiguousarray(dz, dtype=float)

    azimuth = np.arctan2(dy, dx)
    planar = np.hypot(dx, dy)
    polar = np.arctan2(planar / lat_scale, dz / vert_scale)
    degenerate = (planar == 0.0) & (dz == 0.0)
    if degenerate.any():
        polar = np.where(degenerate, 0.5 * np.pi, polar)

    sin_pol = np.sin(polar)
    cos_pol = np.cos(polar)
    num = lat_scale * sin_pol * planar + vert_scale * cos_pol * dz
    den = (lat_scale * sin_pol) ** 2 + (vert_scale * cos_pol) ** 2
    radial = np.clip(num / den, radial_lo, radial_hi)

    lat_r = lat_scale * radial * sin_pol
    tx = lat_r * np.cos(azimuth)
    ty = lat_r * np.sin(azimuth)
    tz = vert_scale * radial * cos_pol
    return azimuth, polar, radial, tx, ty, tz
