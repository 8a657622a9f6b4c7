"""Hankel-pencil root recovery: counting, solving, conditioning, error
estimates, multiplicities."""

import itertools
import math

import mpmath
import numpy as np
import pytest

from meroloc.contour import moments
from meroloc.errors import (
    InvalidInputError,
    MultiplicityInconsistencyError,
)
from meroloc.geometry import from_annulus, rect_from_corners
from meroloc.prony import (
    PronyResult,
    _greedy_match,
    analyze,
    count_roots,
    estimate_condition,
    estimate_errors,
    hankel,
    multiplicities,
    solve_pencil,
)

from conftest import EXAMPLE1_ROOTS, synth_moments

RATIONAL_REFERENCE_ROOTS = [
    -0.5999999999753678 - 0.6999999999322971j,
    0.7000000004745937 - 0.7999999997652205j,
    0.7999999995583811 + 0.9000000002491819j,
    -0.5000000000007568 + 0.5999999999992878j,
]


class TestHankel:
    def test_definition(self):
        mv = synth_moments([0.5], [1], 3)
        mv.values[:] = [1.0, 2.0, 3.0]
        m = hankel(mv, 2, 0).to_array()
        np.testing.assert_array_equal(m, [[1.0, 2.0], [2.0, 3.0]])

    def test_shift_out_of_bounds(self):
        mv = synth_moments([0.5], [1], 3)
        with pytest.raises(InvalidInputError):
            hankel(mv, 2, 1)

    def test_one_by_one_shifted(self):
        mv = synth_moments([0.5], [2], 4)
        m = hankel(mv, 1, 1).to_array()
        np.testing.assert_allclose(m, [[2 * 0.5]])


class TestCountRoots:
    def test_no_roots(self):
        mv = synth_moments([0.5], [1], 10)
        mv.values[:] = 0.0
        mv.winding = 0
        assert count_roots(mv, 3, 1e-10) == 0

    def test_single_root(self):
        mv = synth_moments([0.9], [1], 10)
        assert count_roots(mv, 3, 1e-10) == 1

    def test_three_roots_with_svd_oracle(self):
        zetas = [0.8 * np.exp(1j * np.pi / 4), 0.7 * np.exp(-2j * np.pi / 3), 0.95]
        mults = [2, -1, 1]
        mv = synth_moments(zetas, mults, 16)
        # oracle: rank of the size-5 Hankel via high-precision SVD
        with mpmath.workdps(50):
            hm = mpmath.matrix(5, 5)
            for i in range(5):
                for j in range(5):
                    v = sum(m * mpmath.mpc(z) ** (i + j)
                            for z, m in zip(zetas, mults))
                    hm[i, j] = v
            sv = mpmath.svd_c(hm, compute_uv=False)
            oracle_rank = sum(1 for k in range(5) if sv[k] > 1e-20)
        assert oracle_rank == 3
        assert count_roots(mv, 6, 1e-12) == 3

    def test_sentinel_when_unstable(self):
        rng = np.random.RandomState(2)
        # moments of 6 roots cannot stabilize when only n_max=3 is allowed
        zetas = 0.9 * np.exp(2j * np.pi * rng.rand(6))
        mv = synth_moments(zetas, [1] * 6, 12)
        assert count_roots(mv, 3, 1e-12) == 4


class TestSolvePencil:
    def test_single_root(self):
        mv = synth_moments([0.5], [1], 6)
        np.testing.assert_allclose(solve_pencil(mv, 1), [0.5], atol=1e-13)

    def test_symmetric_pair(self):
        mv = synth_moments([0.8, -0.8], [1, 1], 8)
        roots = solve_pencil(mv, 2)
        np.testing.assert_allclose(sorted(r.real for r in roots), [-0.8, 0.8],
                                   atol=1e-12)

    def test_example1_pipeline(self, example1_handle):
        # enclosing rectangle wide enough that all roots image into
        # |zeta| >= 0.3, the regime the pencil is designed for
        rect = rect_from_corners(-4.5 - 0.95j, 4.5 + 0.95j, eps0=0.1)
        mv = moments(example1_handle, rect, 6, 1.49e-8)
        n = count_roots(mv, 4, 10 * 1.49e-8)
        assert n == 4
        zetas = solve_pencil(mv, n)
        z_locs = [from_annulus(rect, z) for z in zetas]
        for loc in z_locs:
            assert min(abs(loc - t) for t in RATIONAL_REFERENCE_ROOTS) < 1e-8


class TestEstimateCondition:
    def test_single_root_is_one(self):
        assert estimate_condition([0.5 + 0.2j]) == 1.0

    def test_antipodal_pair(self):
        # literal substitution: 2^2 * 1 * [1+1]^2 * (1/|1-(-1)|)^2 = 4
        val = estimate_condition([1.0 + 0.0j, -1.0 + 0.0j])
        np.testing.assert_allclose(val, 4.0, rtol=1e-12)

    def test_angular_cluster_blows_up(self):
        val = estimate_condition([np.exp(0j), np.exp(0.01j)])
        assert val > 1e4

    def test_rotation_invariance(self):
        rng = np.random.RandomState(5)
        zetas = rng.uniform(0.4, 1.0, 5) * np.exp(2j * np.pi * rng.rand(5))
        base = estimate_condition(zetas)
        for phi in rng.uniform(0, 2 * np.pi, 5):
            rotated = estimate_condition(zetas * np.exp(1j * phi))
            np.testing.assert_allclose(rotated, base, rtol=1e-9)

    def test_coincident_roots_infinite(self):
        assert math.isinf(estimate_condition([0.5, 0.5 + 1e-16]))

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            estimate_condition([])


class TestEstimateErrors:
    def test_exact_moments_machine_agreement(self):
        mv = synth_moments([0.6, -0.7j], [1, 1], 10)
        deltas, exact = estimate_errors(mv, 2, [0.6, -0.7j])
        assert exact
        assert max(deltas) <= 1e-12

    def test_noise_injection_detected(self):
        zetas = [0.6, -0.7j]
        mv = synth_moments(zetas, [1, 1], 10)
        mv.values[3] += 1e-6
        solved = solve_pencil(mv, 2)
        deltas, exact = estimate_errors(mv, 2, solved)
        assert exact
        assert min(deltas) > 1e-8

    def test_oversized_pencil_contains_true_roots(self):
        # finite eigenvalues of the oversized pencil contain the true roots,
        # in the operating regime (radii in [0.3, 1], angular gaps >= 0.1)
        rng = np.random.RandomState(21)
        done = 0
        while done < 10:
            n = rng.randint(1, 6)
            radii = rng.uniform(0.3, 1.0, n)
            angles = np.sort(rng.uniform(0, 2 * np.pi, n))
            gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
            if n > 1 and np.min(gaps) < 0.1:
                continue
            zetas = radii * np.exp(1j * angles)
            mults = rng.choice([-2, -1, 1, 2, 3], n)
            if mults.sum() == 0:
                mults[0] += 1
            mv = synth_moments(zetas, mults, 2 * n + 4)
            deltas, exact = estimate_errors(mv, n, zetas)
            assert exact
            assert max(deltas) < 1e-10
            done += 1

    def test_greedy_matching_near_optimal(self):
        rng = np.random.RandomState(33)
        for _ in range(50):
            n = rng.randint(2, 9)
            a = rng.randn(n) + 1j * rng.randn(n)
            b = a + 0.01 * (rng.randn(n) + 1j * rng.randn(n))
            rng.shuffle(b)
            match = _greedy_match(a, b)
            assert sorted(match) == list(range(n))  # bijection
            greedy_cost = sum(abs(a[i] - b[match[i]]) for i in range(n))
            optimal = min(
                sum(abs(a[i] - b[p[i]]) for i in range(n))
                for p in itertools.permutations(range(n)))
            assert greedy_cost <= 1.5 * optimal + 1e-15


class TestMultiplicities:
    def test_single_double_root(self):
        mv = synth_moments([0.5], [2], 6)
        assert multiplicities(mv, [0.5]) == [2]

    def test_example1_identities(self, example1_handle, unit_square):
        mv = moments(example1_handle, unit_square, 6, 1.49e-8)
        zetas = solve_pencil(mv, 4)
        mults = multiplicities(mv, zetas)
        by_root = {}
        for zeta, m in zip(zetas, mults):
            loc = from_annulus(unit_square, zeta)
            truth = min(EXAMPLE1_ROOTS, key=lambda t: abs(loc - t))
            by_root[truth] = m
        assert by_root == EXAMPLE1_ROOTS

    def test_rounding_contract(self):
        # weights 0.9999999 and -2.0000001 round to 1 and -2
        zetas = np.array([0.6, -0.5 + 0.3j])
        weights = np.array([0.9999999, -2.0000001])
        ks = np.arange(8)
        values = ((zetas[None, :] ** ks[:, None]) @ weights).astype(complex)
        values[0] = complex(-1)  # winding -1 = 1 + (-2)
        from meroloc.contour import MomentVector
        mv = MomentVector(values, -1, 1e-12, 1.0 + 0j)
        assert multiplicities(mv, zetas) == [1, -2]

    def test_nonintegral_weights_rejected(self):
        zetas = np.array([0.5, -0.5])
        ks = np.arange(8)
        values = ((zetas[None, :] ** ks[:, None]) @ np.array([1.6, 0.4])).astype(complex)
        values[0] = complex(2)
        from meroloc.contour import MomentVector
        mv = MomentVector(values, 2, 1e-12, 1.0 + 0j)
        with pytest.raises(MultiplicityInconsistencyError):
            multiplicities(mv, zetas)

    def test_wrong_sum_rejected(self):
        zetas = np.array([0.5, -0.5])
        ks = np.arange(8)
        values = ((zetas[None, :] ** ks[:, None]) @ np.array([1.0, 1.0]))
        from meroloc.contour import MomentVector
        values[0] = 5.0  # claim winding 5 while weights sum to 2
        mv = MomentVector(values.astype(complex), 5, 1e-12, 1.0 + 0j)
        with pytest.raises(MultiplicityInconsistencyError):
            multiplicities(mv, zetas)


class TestRoundTrip:
    def test_random_root_sets_full_recovery(self):
        # exact synthetic moments: count, solve, multiplicities, deltas
        rng = np.random.RandomState(101)
        done = 0
        while done < 40:
            n = rng.randint(1, 9)
            radii = rng.uniform(0.3, 1.0, n)
            angles = np.sort(rng.uniform(0, 2 * np.pi, n))
            if n > 1 and np.min(np.diff(np.concatenate(
                    [angles, [angles[0] + 2 * np.pi]]))) < 0.1:
                continue
            zetas = radii * np.exp(1j * angles)
            mults = rng.choice([-3, -2, -1, 1, 2, 3], n)
            if mults.sum() == 0:
                mults[0] = 1 if mults[0] < 0 else mults[0] + 1
            mv = synth_moments(zetas, mults, 22)
            assert count_roots(mv, 8, 1e-12) == n
            solved = solve_pencil(mv, n)
            for s in solved:
                assert min(abs(s - z) for z in zetas) < 1e-9
            recovered = multiplicities(mv, solved)
            lookup = {z: m for z, m in zip(zetas, mults)}
            for s, m in zip(solved, recovered):
                truth = min(lookup, key=lambda z: abs(s - z))
                assert lookup[truth] == m
            deltas, exact = estimate_errors(mv, n, solved)
            assert exact and max(deltas) <= 1e-9
            done += 1

    def test_analyze_builds_consistent_result(self):
        zetas = [0.8 * np.exp(0.4j), 0.5 * np.exp(-2.0j)]
        mv = synth_moments(zetas, [2, -1], 10)
        result = analyze(mv, 2)
        assert isinstance(result, PronyResult)
        assert sum(result.multiplicities) == result.winding == 1
        assert result.r_plus >= result.r_minus > 0
        assert result.vandermonde_residual < 1e-10
        assert result.kappa_sq >= 1.0
        assert not any(result.radius_flags)

    def test_result_invariants_enforced(self):
        with pytest.raises(InvalidInputError):
            PronyResult(zetas=(0.5,), multiplicities=(2,), kappa_sq=1.0,
                        deltas=(1e-12,), r_plus=0.5, r_minus=0.5,
                        vandermonde_residual=0.0, winding=1)
        with pytest.raises(InvalidInputError):
            PronyResult(zetas=(0.5,), multiplicities=(0,), kappa_sq=1.0,
                        deltas=(1e-12,), r_plus=0.5, r_minus=0.5,
                        vandermonde_residual=0.0, winding=0)
