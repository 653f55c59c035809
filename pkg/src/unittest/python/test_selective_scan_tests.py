"""Selective scan (SS1D / SS2D) test cases"""
import dataclasses
from unittest import TestCase

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rgbir_fusion import (DirectionParams, FusionKernelException, ScanInputs, fold_direction,
                          ss1d_backward, ss1d_scan, ss2d, unfold_direction)
from rgbir_fusion.gradient_check import check_scan_gradients, num_grad, random_scan_inputs
from rgbir_fusion.selective_scan import DIRECTIONS


def cumsum_inputs(u):
    """Scan parameters that turn the recurrence into a prefix sum"""
    u = np.asarray(u, dtype=np.float64).reshape(1, -1, 1)
    length = u.shape[1]
    return ScanInputs(u=u, delta=np.ones((1, length, 1)), A=np.zeros((1, 1)),
                      B_seq=np.ones((1, length, 1)), C_seq=np.ones((1, length, 1)))


class TestSS1DForward(TestCase):
    """ss1d_scan tests"""
    def test_prefix_sum(self):
        """A = 0, delta = B = C = 1 gives the cumulative sum"""
        self.assertEqual([1.0, 3.0, 6.0], ss1d_scan(cumsum_inputs([1, 2, 3])).ravel().tolist())

    def test_single_step(self):
        """hand-unrolled single step gives 12"""
        inputs = ScanInputs(u=np.full((1, 1, 1), 4.0), delta=np.full((1, 1, 1), 0.5),
                            A=np.full((1, 1), -1.0), B_seq=np.full((1, 1, 1), 2.0),
                            C_seq=np.full((1, 1, 1), 3.0))
        self.assertAlmostEqual(12.0, ss1d_scan(inputs)[0, 0, 0], places=12)

    def test_against_direct_recurrence(self):
        """vectorized scan equals a per-(b, d) scalar loop"""
        inputs = random_scan_inputs(np.random.default_rng(0), 2, 7, 3, 4)
        expected = np.zeros(inputs.u.shape)
        for batch in range(2):
            for channel in range(3):
                hidden = np.zeros(4)
                for step in range(7):
                    delta = inputs.delta[batch, step, channel]
                    hidden = (np.exp(delta * inputs.A[channel]) * hidden
                              + delta * inputs.B_seq[batch, step] * inputs.u[batch, step, channel])
                    expected[batch, step, channel] = hidden @ inputs.C_seq[batch, step]
        np.testing.assert_allclose(ss1d_scan(inputs), expected, atol=1e-12)

    def test_grouped_parameters(self):
        """grouped B/C equal running each channel group with its own shared B/C"""
        rng = np.random.default_rng(1)
        base = random_scan_inputs(rng, 1, 5, 4, 3)
        b_grouped = rng.normal(size=(1, 5, 2, 3))
        c_grouped = rng.normal(size=(1, 5, 2, 3))
        out = ss1d_scan(dataclasses.replace(base, B_seq=b_grouped, C_seq=c_grouped))
        for group in range(2):
            with self.subTest(group=group):
                part = slice(2 * group, 2 * group + 2)
                single = ScanInputs(base.u[:, :, part], base.delta[:, :, part], base.A[part],
                                    b_grouped[:, :, group], c_grouped[:, :, group])
                np.testing.assert_allclose(out[:, :, part], ss1d_scan(single), atol=1e-13)

    def test_causality(self):
        """perturbing position 3 leaves positions 1 and 2 bit-identical"""
        inputs = random_scan_inputs(np.random.default_rng(2), 1, 6, 2, 3)
        perturbed = inputs.u.copy()
        perturbed[:, 2] += 5.0
        base = ss1d_scan(inputs)
        changed = ss1d_scan(dataclasses.replace(inputs, u=perturbed))
        self.assertTrue(np.array_equal(base[:, :2], changed[:, :2]))
        self.assertFalse(np.array_equal(base[:, 2:], changed[:, 2:]))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2 ** 16))
    def test_linearity_in_u(self, alpha, beta, seed):
        """output is linear in u with frozen delta, A, B, C"""
        rng = np.random.default_rng(seed)
        inputs = random_scan_inputs(rng, 1, 8, 2, 3)
        other = rng.normal(size=inputs.u.shape)
        lhs = ss1d_scan(dataclasses.replace(inputs, u=alpha * inputs.u + beta * other))
        rhs = alpha * ss1d_scan(inputs) + beta * ss1d_scan(dataclasses.replace(inputs, u=other))
        self.assertLess(np.max(np.abs(lhs - rhs)), 1e-10)

    def test_long_sequence_bounded(self):
        """A <= 0 keeps |h_t| below the accumulated input drive over 10^4 steps"""
        rng = np.random.default_rng(3)
        length = 10_000
        inputs = ScanInputs(u=rng.uniform(-1, 1, size=(1, length, 1)),
                            delta=rng.uniform(0.01, 0.1, size=(1, length, 1)),
                            A=np.full((1, 1), -0.5), B_seq=np.ones((1, length, 1)),
                            C_seq=np.ones((1, length, 1)))
        states = ss1d_scan(inputs)
        bound = np.cumsum(np.abs(inputs.delta * inputs.u), axis=1)
        self.assertTrue(np.all(np.abs(states) <= bound + 1e-9))
        self.assertTrue(np.all(np.isfinite(states)))

    def test_rejects_non_positive_delta(self):
        """delta <= 0 is rejected"""
        inputs = cumsum_inputs([1, 2])
        bad = dataclasses.replace(inputs, delta=np.array([[[1.0], [0.0]]]))
        with self.assertRaises(FusionKernelException) as cm_obj:
            ss1d_scan(bad)
        self.assertEqual("Scan delta must be strictly positive", cm_obj.exception.message)

    def test_rejects_shape_disagreement(self):
        """B_seq with the wrong state size is rejected"""
        inputs = random_scan_inputs(np.random.default_rng(4), 1, 4, 2, 3)
        with self.assertRaises(FusionKernelException):
            ss1d_scan(dataclasses.replace(inputs, B_seq=np.ones((1, 4, 2))))


class TestSS1DBackward(TestCase):
    """ss1d_backward tests"""
    def test_matches_finite_differences(self):
        """ten random B=1, L=6, D=2, N=3 instances within 1e-6 relative error"""
        rng = np.random.default_rng(5)
        for instance in range(10):
            with self.subTest(instance=instance):
                inputs = random_scan_inputs(rng)
                report = check_scan_gradients(inputs, rng.normal(size=inputs.u.shape))
                self.assertLess(report.max_error, 1e-6, report.errors)

    def test_grouped_gradients(self):
        """grouped B/C gradients also match finite differences"""
        rng = np.random.default_rng(6)
        inputs = dataclasses.replace(random_scan_inputs(rng, 1, 5, 4, 2),
                                     B_seq=rng.normal(size=(1, 5, 2, 2)),
                                     C_seq=rng.normal(size=(1, 5, 2, 2)))
        self.assertLess(check_scan_gradients(inputs).max_error, 1e-6)

    def test_zero_cotangent(self):
        """dy = 0 gives exactly zero gradients"""
        inputs = random_scan_inputs(np.random.default_rng(7))
        grads = ss1d_backward(inputs, np.zeros_like(inputs.u))
        for name in ("u", "delta", "A", "B_seq", "C_seq"):
            with self.subTest(name=name):
                self.assertFalse(np.any(getattr(grads, name)))

    def test_prefix_sum_jacobian(self):
        """gradient of sum(y) with respect to u_s is L - s + 1"""
        grads = ss1d_backward(cumsum_inputs([3, 1, 4, 1, 5]), np.ones((1, 5, 1)))
        self.assertEqual([5.0, 4.0, 3.0, 2.0, 1.0], grads.u.ravel().tolist())

    def test_cotangent_shape(self):
        """mismatched dy shape is rejected"""
        inputs = random_scan_inputs(np.random.default_rng(8))
        with self.assertRaises(FusionKernelException):
            ss1d_backward(inputs, np.ones((1, 5, 2)))

    def test_num_grad_quadratic(self):
        """num_grad recovers the gradient of a quadratic"""
        point = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(num_grad(lambda v: float(np.sum(v ** 2)), point),
                                   2 * point, atol=1e-8)


class TestDirectionalScan(TestCase):
    """unfold_direction, fold_direction and ss2d tests"""
    def setUp(self):
        """2x2 map [[a, b], [c, d]] with a..d = 1..4"""
        self.grid = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)

    def test_row_major(self):
        """h_fwd emits (a, b, c, d)"""
        self.assertEqual([1.0, 2.0, 3.0, 4.0],
                         unfold_direction(self.grid, "h_fwd").ravel().tolist())

    def test_column_major(self):
        """v_fwd emits (a, c, b, d)"""
        self.assertEqual([1.0, 3.0, 2.0, 4.0],
                         unfold_direction(self.grid, "v_fwd").ravel().tolist())

    def test_backward_reverses(self):
        """bwd variants reverse the forward order"""
        self.assertEqual([4.0, 3.0, 2.0, 1.0],
                         unfold_direction(self.grid, "h_bwd").ravel().tolist())
        self.assertEqual([4.0, 2.0, 3.0, 1.0],
                         unfold_direction(self.grid, "v_bwd").ravel().tolist())

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 16))
    def test_fold_inverts_unfold(self, height, width, seed):
        """fold(unfold(x, d), d) = x bit-exactly for all four directions"""
        x = np.random.default_rng(seed).normal(size=(2, 3, height, width))
        for direction in DIRECTIONS:
            folded = fold_direction(unfold_direction(x, direction), direction, height, width)
            self.assertTrue(np.array_equal(folded, x))

    def test_fold_inverts_unfold_fixed_sizes(self):
        """3x5 and 8x8 maps round-trip bit-exactly"""
        rng = np.random.default_rng(9)
        for shape in ((1, 2, 3, 5), (1, 2, 8, 8)):
            x = rng.normal(size=shape)
            for direction in DIRECTIONS:
                with self.subTest(shape=shape, direction=direction):
                    restored = fold_direction(unfold_direction(x, direction), direction,
                                              *shape[2:])
                    self.assertTrue(np.array_equal(restored, x))

    def test_unknown_direction(self):
        """unknown direction names are rejected"""
        with self.assertRaises(FusionKernelException):
            unfold_direction(self.grid, "diag")

    def test_prefix_sum_per_direction(self):
        """cumulative-sum parameters give the prefix sum along each direction"""
        x = np.random.default_rng(10).normal(size=(1, 2, 3, 4))
        for direction in DIRECTIONS:
            with self.subTest(direction=direction):
                params = DirectionParams(np.ones((1, 12, 2)), np.zeros((2, 1)),
                                         np.ones((1, 12, 1)), np.ones((1, 12, 1)))
                out = ss2d(x, {direction: params})
                expected = np.cumsum(unfold_direction(x, direction), axis=1)
                np.testing.assert_allclose(unfold_direction(out, direction), expected,
                                           atol=1e-12)

    def test_symmetric_input(self):
        """on a symmetric map the vertical response is the transposed horizontal one"""
        rng = np.random.default_rng(11)
        x = rng.normal(size=(1, 2, 4, 4))
        x = x + x.transpose(0, 1, 3, 2)
        params = DirectionParams(rng.uniform(0.1, 1, size=(1, 16, 2)),
                                 -rng.uniform(0.1, 1, size=(2, 3)),
                                 rng.normal(size=(1, 16, 3)), rng.normal(size=(1, 16, 3)))
        horizontal = ss2d(x, {"h_fwd": params})
        vertical = ss2d(x, {"v_fwd": params})
        self.assertTrue(np.array_equal(vertical, horizontal.transpose(0, 1, 3, 2)))

    def test_sum_over_directions(self):
        """two directions give the sum of the single-direction outputs"""
        rng = np.random.default_rng(12)
        x = rng.normal(size=(1, 2, 3, 3))
        params = {d: DirectionParams(rng.uniform(0.1, 1, size=(1, 9, 2)),
                                     -rng.uniform(0.1, 1, size=(2, 2)),
                                     rng.normal(size=(1, 9, 2)), rng.normal(size=(1, 9, 2)))
                  for d in ("h_fwd", "v_bwd")}
        both = ss2d(x, params)
        single = ss2d(x, {"h_fwd": params["h_fwd"]}) + ss2d(x, {"v_bwd": params["v_bwd"]})
        np.testing.assert_allclose(both, single, atol=1e-12)
        self.assertEqual(x.shape, both.shape)

    def test_empty_direction_set(self):
        """an empty direction set is rejected"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            ss2d(self.grid, {})
        self.assertEqual("ss2d needs at least one scan direction", cm_obj.exception.message)
