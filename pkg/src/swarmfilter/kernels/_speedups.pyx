# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel for the spherical block update.

Semantics match kernels.reference.spherical_project; one fused pass instead
of a dozen numpy temporaries.  Angle conventions (atan2 everywhere, all-zero
input -> azimuth 0, polar pi/2, radial at the lower bound) are identical.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, hypot, sin

cnp.import_array()

NAME = "compiled"


def spherical_project(dx, dy, dz, double lat_scale, double vert_scale,
                      double radial_lo, double radial_hi):
    """See kernels.reference.spherical_project for the contract."""
    cdef double[::1] x = np.ascontiguousarray(dx, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(dy, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(dz, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    if y.shape[0] != n or z.shape[0] != n:
        raise ValueError("input arrays must have equal length")

    azimuth_arr = np.empty(n, dtype=np.float64)
    polar_arr = np.empty(n, dtype=np.float64)
    radial_arr = np.empty(n, dtype=np.float64)
    tx_arr = np.empty(n, dtype=np.float64)
    ty_arr = np.empty(n, dtype=np.float64)
    tz_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] azimuth = azimuth_arr
    cdef double[::1] polar = polar_arr
    cdef double[::1] radial = radial_arr
    cdef double[::1] tx = tx_arr
    cdef double[::1] ty = ty_arr
    cdef double[::1] tz = tz_arr

    cdef Py_ssize_t i
    cdef double xi, yi, zi, az, pol, planar, sp, cp, num, den, rad, lat_r
    cdef double half_pi = 1.5707963267948966

    with nogil:
        for i in range(n):
            xi = x[i]
            yi = y[i]
            zi = z[i]
            az = atan2(yi, xi)
            planar = hypot(xi, yi)
            if planar == 0.0 and zi == 0.0:
                pol = half_pi
            else:
                pol = atan2(planar / lat_scale, zi / vert_scale)
            sp = sin(pol)
            cp = cos(pol)
            num = lat_scale * sp * planar + vert_scale * cp * zi
            den = (lat_scale * sp) * (lat_scale * sp) + (vert_scale * cp) * (vert_scale * cp)
            rad = num / den
            if rad < radial_lo:
                rad = radial_lo
            elif rad > radial_hi:
                rad = radial_hi
            lat_r = lat_scale * rad * sp
            azimuth[i] = az
            polar[i] = pol
            radial[i] = rad
            tx[i] = lat_r * cos(az)
            ty[i] = lat_r * sin(az)
            tz[i] = vert_scale * rad * cp

    return azimuth_arr, polar_arr, radial_arr, tx_arr, ty_arr, tz_arr
