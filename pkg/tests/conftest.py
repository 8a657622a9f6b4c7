"""Shared fixtures and independent oracles for the test suite."""

import mpmath
import numpy as np
import pytest

from meroloc.contour import MomentVector
from meroloc.functions import RationalSpec, make_rational
from meroloc.geometry import rect_from_corners

mpmath.mp.dps = 40


def wofz_reference(z: complex) -> complex:
    """High-precision Faddeeva oracle: w(z) = exp(-z^2) erfc(-iz)."""
    zm = mpmath.mpc(z)
    return complex(mpmath.exp(-zm * zm) * mpmath.erfc(-1j * zm))


def plasma_z_reference(z: complex) -> complex:
    """High-precision Z(z) via the erf representation."""
    zm = mpmath.mpc(z)
    val = 1j * mpmath.sqrt(mpmath.pi) * mpmath.exp(-zm * zm) * (1 + mpmath.erf(1j * zm))
    return complex(val)


def synth_moments(zetas, mults, count, eps_i=1e-15, zeta_start=1.0 + 0.0j):
    """Exact moments G_k = sum_j n_j * zeta_j**k for k = 0..count-1.

    This is the defining power-sum identity evaluated directly, independent
    of any contour machinery; the winding is the multiplicity sum.
    """
    zetas = np.asarray(zetas, dtype=complex)
    mults = np.asarray(mults, dtype=float)
    ks = np.arange(count)
    values = (zetas[None, :] ** ks[:, None] @ mults).astype(complex)
    winding = int(round(mults.sum()))
    values[0] = complex(winding)
    return MomentVector(values, winding, eps_i, complex(zeta_start))


def random_root_set(rng, max_roots=10, min_sep=1e-3, box=0.9, max_mult=3):
    """Root locations with signed multiplicities, pairwise separated."""
    n_roots = rng.randint(1, max_roots + 1)
    locs = []
    while len(locs) < n_roots:
        cand = complex(rng.uniform(-box, box), rng.uniform(-box, box))
        if all(abs(cand - o) >= min_sep for o in locs):
            locs.append(cand)
    mults = [int(rng.randint(1, max_mult + 1)) * int(rng.choice([-1, 1]))
             for _ in locs]
    return dict(zip(locs, mults))


def rational_from_roots(roots: dict):
    return RationalSpec(
        zeros=tuple((loc, m) for loc, m in roots.items() if m > 0),
        poles=tuple((loc, -m) for loc, m in roots.items() if m < 0),
    )


EXAMPLE1_SPEC = RationalSpec(
    zeros=((0.8 + 0.9j, 1), (0.7 - 0.8j, 1), (-0.6 - 0.7j, 1)),
    poles=((-0.5 + 0.6j, 2),),
)

EXAMPLE1_ROOTS = {
    0.8 + 0.9j: 1,
    0.7 - 0.8j: 1,
    -0.6 - 0.7j: 1,
    -0.5 + 0.6j: -2,
}


@pytest.fixture
def example1_handle():
    return make_rational(EXAMPLE1_SPEC)


@pytest.fixture
def unit_square():
    return rect_from_corners(-1 - 1j, 1 + 1j, eps0=0.1)
