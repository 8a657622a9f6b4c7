"""Pure-numpy implementations of the hot kernels.

`meroloc.kernels` selects this module when the compiled extension is not
available (or is disabled through MEROLOC_PURE_PYTHON=1).  The functions
here must stay behaviourally interchangeable with `_kernels.pyx`.
"""

import numpy as np

from ._wcoef import GAUSS_WEIGHTS, KRONROD_WEIGHTS, weideman_coefficients

_HALF_WIDTH, _COEF = weideman_coefficients()
_INV_SQRT_PI = 0.5641895835477562869480795


def _w_upper(z):
    # Rational approximation of w(z) on the closed upper half-plane.
    iz = 1j * z
    r = 1.0 / (_HALF_WIDTH - iz)
    zm = (_HALF_WIDTH + iz) * r
    p = np.zeros_like(zm)
    for c in _COEF:
        p = p * zm + c
    return 2.0 * p * r * r + _INV_SQRT_PI * r


def faddeeva_w(z):
    """Faddeeva function w(z) = exp(-z**2) * erfc(-iz), scalar or array.

    The lower half-plane goes through the reflection
    w(z) = 2 exp(-z**2) - w(-z), so relative accuracy near the zeros of w
    (which all lie below the real axis) is limited by the inherent
    cancellation there; absolute accuracy stays at roundoff level.
    """
    arr = np.asarray(z, dtype=np.complex128)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    lower = flat.imag < 0.0
    if np.any(~lower):
        out[~lower] = _w_upper(flat[~lower])
    if np.any(lower):
        zl = flat[lower]
        out[lower] = 2.0 * np.exp(-zl * zl) - _w_upper(-zl)
    if scalar:
        return complex(out[0])
    return out.reshape(arr.shape)


def panel_moment_sums(zeta, lnf, kmax):
    """Per-panel weighted sums  sum_n w_n * zeta_n**k * lnf_n,  k = 1..kmax.

    zeta, lnf : (P, 15) complex arrays at the Kronrod nodes of each panel.
    Returns (kronrod_sums, gauss_sums), both of shape (P, kmax).
    """
    zarr = np.asarray(zeta, dtype=np.complex128)
    farr = np.asarray(lnf, dtype=np.complex128)
    npanel = zarr.shape[0]
    kron = np.empty((npanel, kmax), np.complex128)
    gauss = np.empty((npanel, kmax), np.complex128)
    work = farr * zarr
    for k in range(kmax):
        kron[:, k] = work @ KRONROD_WEIGHTS
        gauss[:, k] = work @ GAUSS_WEIGHTS
        if k + 1 < kmax:
            work = work * zarr
    return kron, gauss
