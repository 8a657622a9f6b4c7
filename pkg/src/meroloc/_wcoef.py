"""Numeric tables shared by the compiled and pure-python kernel backends.

Two tables live here: the coefficients of the rational approximation used
for the Faddeeva function, and the 15-point Kronrod rule with its embedded
7-point Gauss rule (nodes ascending over [-1, 1]).
"""

import numpy as np

#: Number of terms in the rational Faddeeva approximation.  48 puts the
#: approximation at its double-precision roundoff floor (~6e-14 relative
#: over the upper half-plane), comfortably under the 1e-12 contract.
FADDEEVA_TERMS = 48


def weideman_coefficients(n_terms: int = FADDEEVA_TERMS):
    """Coefficients for the rational expansion of w(z) on Im z >= 0.

    The expansion samples exp(-t**2) on the real line through the Moebius
    map t = L*tan(theta/2) and converts to polynomial coefficients in
    Z = (L+iz)/(L-iz) with a single FFT.  Returns (L, coefficients) with
    the highest-degree coefficient first, ready for Horner evaluation.
    """
    m = 2 * n_terms
    k = np.arange(-m + 1, m)
    half_width = np.sqrt(n_terms / np.sqrt(2.0))
    t = half_width * np.tan(k * np.pi / (2 * m))
    samples = np.exp(-t * t) * (half_width * half_width + t * t)
    samples = np.concatenate(([0.0], samples))
    coef = np.real(np.fft.fft(np.fft.fftshift(samples))) / (2 * m)
    return half_width, np.ascontiguousarray(coef[1:n_terms + 1][::-1])


# 15-point Kronrod nodes/weights (positive half, node-descending) and the
# embedded 7-point Gauss weights, as tabulated in QUADPACK's dqk15.
_XGK_HALF = np.array([
    0.9914553711208126,
    0.9491079123427585,
    0.8648644233597691,
    0.7415311855993944,
    0.5860872354676911,
    0.4058451513773972,
    0.2077849550078985,
    0.0,
])
_WGK_HALF = np.array([
    0.02293532201052922,
    0.06309209262997855,
    0.1047900103222502,
    0.1406532597155259,
    0.1690047266392679,
    0.1903505780647854,
    0.2044329400752989,
    0.2094821410847278,
])
_WG_HALF = np.array([
    0.1294849661688697,
    0.2797053914892767,
    0.3818300505051189,
    0.4179591836734694,
])


def _build_rule():
    nodes = np.concatenate((-_XGK_HALF[:7], _XGK_HALF[::-1]))
    wk = np.concatenate((_WGK_HALF[:7], _WGK_HALF[::-1]))
    # Gauss nodes are the odd-indexed entries of the half table.
    wg = np.zeros(15)
    wg[1] = wg[13] = _WG_HALF[0]
    wg[3] = wg[11] = _WG_HALF[1]
    wg[5] = wg[9] = _WG_HALF[2]
    wg[7] = _WG_HALF[3]
    return (np.ascontiguousarray(nodes), np.ascontiguousarray(wk),
            np.ascontiguousarray(wg))


KRONROD_NODES, KRONROD_WEIGHTS, GAUSS_WEIGHTS = _build_rule()
