"""Argument tracing, winding numbers, and adaptive moment quadrature."""

import math

import numpy as np
import pytest

from meroloc.contour import (
    BoundaryTrace,
    MomentVector,
    moments,
    trace_argument,
    winding_number,
)
from meroloc.errors import (
    BoundaryProximityError,
    InvalidInputError,
    ToleranceNotMetError,
)
from meroloc.functions import FunctionHandle, RationalSpec, make_rational
from meroloc.geometry import rect_from_corners, subdivide, to_annulus

from conftest import EXAMPLE1_ROOTS, EXAMPLE1_SPEC, rational_from_roots


def _handle(name, fn):
    return FunctionHandle(name, fn)


class TestTrace:
    def test_identity_winds_once(self, unit_square):
        trace = trace_argument(_handle("z", lambda z: z), unit_square)
        np.testing.assert_allclose(trace.winding_estimate(), 1.0, atol=1e-9)
        assert winding_number(trace) == 1

    def test_reciprocal_winds_minus_once(self, unit_square):
        trace = trace_argument(_handle("1/z", lambda z: 1.0 / z), unit_square)
        np.testing.assert_allclose(trace.winding_estimate(), -1.0, atol=1e-9)
        assert winding_number(trace) == -1

    def test_constant_has_flat_theta(self, unit_square):
        trace = trace_argument(
            _handle("5", lambda z: np.full_like(z, 5.0)), unit_square)
        assert winding_number(trace) == 0
        assert np.max(np.abs(np.diff(trace.theta))) == 0.0

    def test_jumps_below_half_pi(self, unit_square, example1_handle):
        trace = trace_argument(example1_handle, unit_square)
        jumps = np.abs(np.diff(trace.theta))
        assert np.max(jumps) < math.pi / 2

    def test_reconstruction_invariant(self, unit_square, example1_handle):
        trace = trace_argument(example1_handle, unit_square)
        recon = np.exp(trace.log_abs + 1j * np.mod(trace.theta, 2 * math.pi))
        rel = np.abs(recon - trace.f_values) / np.abs(trace.f_values)
        assert np.max(rel) < 1e-12

    def test_closed_loop(self, unit_square, example1_handle):
        trace = trace_argument(example1_handle, unit_square)
        assert trace.points[0] == trace.points[-1]
        turns = (trace.theta[-1] - trace.theta[0]) / (2 * math.pi)
        assert abs(turns - round(turns)) < 1e-6

    def test_root_on_boundary_raises(self, unit_square):
        handle = make_rational(RationalSpec(zeros=((1.0 + 0.0j, 1),)))
        with pytest.raises(BoundaryProximityError):
            trace_argument(handle, unit_square)


class TestWindingNumber:
    def test_example1_winding(self, unit_square, example1_handle):
        trace = trace_argument(example1_handle, unit_square)
        assert winding_number(trace) == 1  # three simple zeros, double pole

    def test_cubed_zero(self):
        a = 0.3 - 0.2j
        rect = rect_from_corners(a - 0.5 - 0.5j, a + 0.5 + 0.5j)
        handle = _handle("(z-a)^3", lambda z: (z - a) ** 3)
        assert winding_number(trace_argument(handle, rect)) == 3

    def test_no_roots(self, unit_square):
        handle = _handle("exp", np.exp)
        assert winding_number(trace_argument(handle, unit_square)) == 0

    def test_inconsistent_trace_rejected(self):
        theta = np.array([0.0, 1.0, 2.0, 3.0])
        trace = BoundaryTrace(
            points=np.zeros(4, complex), f_values=np.ones(4, complex),
            theta=theta, log_abs=np.zeros(4))
        from meroloc.errors import InconsistentTraceError
        with pytest.raises(InconsistentTraceError):
            winding_number(trace)


class TestMoments:
    def test_single_zero_at_origin(self, unit_square):
        mv = moments(_handle("z", lambda z: z), unit_square, 3, 1e-10)
        assert mv.values[0] == 1.0 + 0.0j
        t0 = to_annulus(unit_square, 0.0)
        np.testing.assert_allclose(mv.values[1], t0, atol=1e-10)
        # G_k = T(0)**k for a single simple zero at the origin
        np.testing.assert_allclose(mv.values[2], t0 ** 2, atol=1e-10)

    def test_example1_against_power_sums(self, unit_square, example1_handle):
        mv = moments(example1_handle, unit_square, 3, 1e-9)
        for k in range(6):
            expected = sum(
                m * to_annulus(unit_square, loc) ** k
                for loc, m in EXAMPLE1_ROOTS.items())
            np.testing.assert_allclose(mv.values[k], expected, atol=1e-8)

    def test_no_roots_all_zero(self, unit_square):
        mv = moments(_handle("exp", np.exp), unit_square, 4, 1e-9)
        assert mv.winding == 0
        assert np.max(np.abs(mv.values)) <= 1e-9

    def test_winding_stored_exactly(self, unit_square, example1_handle):
        mv = moments(example1_handle, unit_square, 2, 1e-8)
        assert mv.values[0] == complex(mv.winding)
        assert mv.winding == 1

    def test_reciprocal_quadrature_identity(self):
        # f = 1/z around the origin: G_0 = -1 exactly, via the full
        # integration-by-parts path
        rect = rect_from_corners(-0.7 - 0.6j, 0.8 + 0.9j)
        mv = moments(_handle("1/z", lambda z: 1.0 / z), rect, 2, 1e-10)
        assert mv.winding == -1
        np.testing.assert_allclose(mv.values[1],
                                   -to_annulus(rect, 0.0), atol=1e-10)

    def test_subdivision_conserves_moments(self):
        # winding adds exactly across children; every region's higher
        # moments match the power sums of its own roots under its own
        # transform (children live in different zeta coordinates, so the
        # k >= 1 values cannot literally add)
        rng = np.random.RandomState(77)
        rect = rect_from_corners(-1 - 1j, 1 + 1j)
        eps = 1e-6
        trials = 0
        attempts = 0
        while trials < 50 and attempts < 300:
            attempts += 1
            roots = {}
            n = rng.randint(1, 6)
            while len(roots) < n:
                cand = complex(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
                if all(abs(cand - o) >= 0.05 for o in roots):
                    roots[cand] = int(rng.randint(1, 3)) * int(rng.choice([-1, 1]))
            # skip draws with a root too close to the shared edge
            if any(abs(loc.real) < 0.05 for loc in roots):
                continue
            handle = make_rational(rational_from_roots(roots))
            kids = subdivide(rect)
            parent = moments(handle, rect, 3, eps)
            left = moments(handle, kids[0], 3, eps)
            right = moments(handle, kids[1], 3, eps)
            assert parent.winding == left.winding + right.winding
            regions = [(rect, parent, roots),
                       (kids[0], left,
                        {l: m for l, m in roots.items() if l.real <= 0}),
                       (kids[1], right,
                        {l: m for l, m in roots.items() if l.real > 0})]
            for region, mv, owned in regions:
                for k in range(6):
                    expect = sum(m * to_annulus(region, loc) ** k
                                 for loc, m in owned.items())
                    np.testing.assert_allclose(mv.values[k], expect,
                                               atol=3 * eps)
            trials += 1
        assert trials == 50

    def test_refinement_convergence(self, unit_square, example1_handle):
        coarse = moments(example1_handle, unit_square, 3, 1e-6)
        fine = moments(example1_handle, unit_square, 3, 1e-7)
        assert np.max(np.abs(coarse.values - fine.values)) < 2e-6

    def test_budget_exhaustion_raises(self, unit_square):
        # a near-boundary root makes the integrand expensive; a tiny budget
        # must surface as tolerance-not-met with the achieved error attached
        handle = make_rational(RationalSpec(zeros=((0.999 + 0.37j, 1),)))
        with pytest.raises(ToleranceNotMetError) as exc_info:
            moments(handle, unit_square, 8, 1e-13, eval_budget=1200)
        assert exc_info.value.achieved is None or exc_info.value.achieved >= 0

    def test_moment_vector_validation(self):
        with pytest.raises(InvalidInputError):
            MomentVector(np.array([0.5 + 0j]), 1, 1e-8, 1.0 + 0j)
        with pytest.raises(InvalidInputError):
            MomentVector(np.array([1.0 + 0j, np.inf + 0j]), 1, 1e-8, 1.0 + 0j)

    def test_evaluations_shared_with_trace(self, unit_square):
        # moments reuse every trace evaluation: the total distinct-point
        # count equals the handle's call count
        handle = make_rational(EXAMPLE1_SPEC)
        mv = moments(handle, unit_square, 3, 1e-8)
        assert mv.eps_i <= 1e-8
        assert handle.evaluation_count > 0


class TestCrossModuleWinding:
    def test_simple_zero_has_winding_one(self):
        # rational handle: winding around an isolated simple zero is +1
        spec = RationalSpec(zeros=((0.25 - 0.125j, 1), (5.0, 2)),
                            poles=((-4.0j, 1),))
        handle = make_rational(spec)
        rect = rect_from_corners(0.25 - 0.125j - (0.3 + 0.3j),
                                 0.25 - 0.125j + (0.3 + 0.3j))
        assert winding_number(trace_argument(handle, rect)) == 1


class TestIndependentQuadratureOracle:
    def test_moments_match_direct_logderivative_integration(self):
        # independent oracle: G_k = (1/2pi i) * loop_integral (f'/f) T(z)**k dz,
        # with the exact logarithmic derivative of the rational (sum of
        # m_j/(z - a_j)) integrated by scipy on each edge -- no shared code
        # with the integration-by-parts path under test
        import scipy.integrate

        from conftest import EXAMPLE1_ROOTS

        rect = rect_from_corners(-1 - 1j, 1 + 1j, eps0=0.1)
        handle = make_rational(EXAMPLE1_SPEC)
        mv = moments(handle, rect, 3, 1e-9)

        def logderiv(z):
            return sum(m / (z - a) for a, m in EXAMPLE1_ROOTS.items())

        corners = rect.boundary_corners()
        for k in range(6):
            total = 0.0 + 0.0j
            for e in range(4):
                a, b = corners[e], corners[(e + 1) % 4]

                def integrand(t):
                    z = a + t * (b - a)
                    return logderiv(z) * to_annulus(rect, z) ** k * (b - a)

                re, _ = scipy.integrate.quad(
                    lambda t: integrand(t).real, 0, 1, limit=400,
                    epsabs=1e-12, epsrel=1e-12)
                im, _ = scipy.integrate.quad(
                    lambda t: integrand(t).imag, 0, 1, limit=400,
                    epsabs=1e-12, epsrel=1e-12)
                total += re + 1j * im
            oracle = total / (2j * np.pi)
            np.testing.assert_allclose(mv.values[k], oracle, atol=2e-9)
