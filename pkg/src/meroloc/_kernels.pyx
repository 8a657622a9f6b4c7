# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Faddeeva evaluation and panel moment accumulation.

Mirrors `_kernels_py`; see that module for the algorithm notes.
"""

import numpy as np

from libc.math cimport cos, exp, sin

from ._wcoef import GAUSS_WEIGHTS, KRONROD_WEIGHTS, weideman_coefficients

_hw, _coef_arr = weideman_coefficients()

cdef double HALF_WIDTH = _hw
cdef double[::1] COEF = np.ascontiguousarray(_coef_arr)
cdef Py_ssize_t NCOEF = COEF.shape[0]
cdef double INV_SQRT_PI = 0.5641895835477562869480795

cdef double[::1] WK = np.ascontiguousarray(KRONROD_WEIGHTS)
cdef double[::1] WG = np.ascontiguousarray(GAUSS_WEIGHTS)


cdef inline double complex _cexp(double complex v) noexcept nogil:
    cdef double m = exp(v.real)
    return m * cos(v.imag) + 1j * (m * sin(v.imag))


cdef inline double complex _w_upper(double complex z) noexcept nogil:
    cdef double complex iz = 1j * z
    cdef double complex r = 1.0 / (HALF_WIDTH - iz)
    cdef double complex zm = (HALF_WIDTH + iz) * r
    cdef double complex p = 0.0
    cdef Py_ssize_t i
    for i in range(NCOEF):
        p = p * zm + COEF[i]
    return 2.0 * p * r * r + INV_SQRT_PI * r


cdef inline double complex _wofz_one(double complex z) noexcept nogil:
    if z.imag >= 0.0:
        return _w_upper(z)
    return 2.0 * _cexp(-z * z) - _w_upper(-z)


def faddeeva_w(z):
    """Faddeeva function w(z) = exp(-z**2) * erfc(-iz), scalar or array."""
    cdef double complex[::1] src, dst
    cdef Py_ssize_t i, n
    arr = np.asarray(z, dtype=np.complex128)
    if arr.ndim == 0:
        return complex(_wofz_one(complex(z)))
    carr = np.ascontiguousarray(arr)
    out = np.empty_like(carr)
    src = carr.ravel()
    dst = out.ravel()
    n = src.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _wofz_one(src[i])
    return out


def panel_moment_sums(zeta, lnf, int kmax):
    """Per-panel weighted sums  sum_n w_n * zeta_n**k * lnf_n,  k = 1..kmax.

    zeta, lnf : (P, 15) complex arrays.  Returns (kronrod, gauss) sums of
    shape (P, kmax).
    """
    zarr = np.ascontiguousarray(zeta, dtype=np.complex128)
    farr = np.ascontiguousarray(lnf, dtype=np.complex128)
    cdef Py_ssize_t npanel = zarr.shape[0]
    kron = np.empty((npanel, kmax), np.complex128)
    gauss = np.empty((npanel, kmax), np.complex128)
    cdef double complex[:, ::1] zv = zarr
    cdef double complex[:, ::1] fv = farr
    cdef double complex[:, ::1] kv = kron
    cdef double complex[:, ::1] gv = gauss
    cdef double complex acc_k, acc_g
    cdef double complex pw[15]
    cdef Py_ssize_t p, j, k
    with nogil:
        for p in range(npanel):
            for j in range(15):
                pw[j] = fv[p, j]
            for k in range(kmax):
                acc_k = 0.0
                acc_g = 0.0
                for j in range(15):
                    pw[j] = pw[j] * zv[p, j]
                    acc_k = acc_k + WK[j] * pw[j]
                    acc_g = acc_g + WG[j] * pw[j]
                kv[p, k] = acc_k
                gv[p, k] = acc_g
    return kron, gauss
