"""Tensor primitive test cases"""
from unittest import TestCase

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rgbir_fusion import (ConvWeights, FusionKernelException, LinearWeights, activate,
                          concat_channels, conv2d, linear, normalize, resample)
from rgbir_fusion.tensor_core import as_tensor
from rgbir_fusion.weight_init import delta_conv, init_conv


class TestConv2d(TestCase):
    """conv2d tests"""
    def test_identity_pointwise(self):
        """1x1 identity kernel returns the input"""
        x = np.random.default_rng(0).normal(size=(2, 2, 3, 4))
        weights = ConvWeights(np.eye(2).reshape(2, 2, 1, 1))
        self.assertTrue(np.array_equal(conv2d(x, weights), x))

    def test_depthwise_delta(self):
        """depthwise centre-tap kernel returns the input"""
        x = np.random.default_rng(1).normal(size=(1, 3, 5, 5))
        self.assertTrue(np.array_equal(conv2d(x, delta_conv(3)), x))

    def test_channel_sum(self):
        """kernel [1, 1] sums the two channels"""
        x = np.array([[[[2.0]], [[3.0]]]])
        weights = ConvWeights(np.ones((1, 2, 1, 1)))
        self.assertEqual(5.0, conv2d(x, weights)[0, 0, 0, 0])

    def test_grouped_matches_split(self):
        """a two-group conv equals two independent convs on the channel halves"""
        rng = np.random.default_rng(2)
        x = rng.normal(size=(1, 4, 5, 5))
        weights = init_conv(rng, 6, 4, 3, groups=2)
        out = conv2d(x, weights)
        for group in range(2):
            with self.subTest(group=group):
                part = ConvWeights(weights.kernel[3 * group:3 * group + 3],
                                   weights.bias[3 * group:3 * group + 3])
                expected = conv2d(x[:, 2 * group:2 * group + 2], part)
                np.testing.assert_allclose(out[:, 3 * group:3 * group + 3], expected, atol=1e-12)

    def test_dense_3x3_against_loop(self):
        """3x3 dense conv equals a direct zero-padded loop"""
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 2, 4, 4))
        weights = init_conv(rng, 3, 2, 3)
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros((1, 3, 4, 4))
        for out_c in range(3):
            for row in range(4):
                for col in range(4):
                    expected[0, out_c, row, col] = np.sum(
                        padded[0, :, row:row + 3, col:col + 3] * weights.kernel[out_c])
        np.testing.assert_allclose(conv2d(x, weights), expected, atol=1e-12)

    def test_shape_mismatch_names_shapes(self):
        """wrong input width is rejected naming both shapes"""
        weights = ConvWeights(np.ones((1, 2, 1, 1)))
        with self.assertRaises(FusionKernelException) as cm_obj:
            conv2d(np.ones((1, 3, 2, 2)), weights)
        self.assertIn("(1, 3, 2, 2)", cm_obj.exception.message)
        self.assertIn("(1, 2, 1, 1)", cm_obj.exception.message)

    def test_groups_must_divide(self):
        """groups not dividing C_out is rejected"""
        with self.assertRaises(FusionKernelException):
            ConvWeights(np.ones((3, 1, 1, 1)), groups=2)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 16))
    def test_linearity(self, alpha, beta, seed):
        """bias-free conv is linear on random 4x4 maps"""
        rng = np.random.default_rng(seed)
        weights = init_conv(rng, 2, 3, 3, bias=False)
        x, y = rng.normal(size=(2, 1, 3, 4, 4))
        lhs = conv2d(alpha * x + beta * y, weights)
        rhs = alpha * conv2d(x, weights) + beta * conv2d(y, weights)
        self.assertLess(np.max(np.abs(lhs - rhs)), 1e-10)

    def test_does_not_mutate_input(self):
        """inputs stay untouched and repeated calls agree bit for bit"""
        rng = np.random.default_rng(4)
        x = rng.normal(size=(1, 2, 4, 4))
        snapshot = x.copy()
        weights = init_conv(rng, 2, 2, 3)
        self.assertTrue(np.array_equal(conv2d(x, weights), conv2d(x, weights)))
        self.assertTrue(np.array_equal(x, snapshot))


class TestNormalize(TestCase):
    """normalize tests"""
    def test_fixed_point(self):
        """a normalized map is a fixed point"""
        x = np.random.default_rng(5).normal(size=(1, 4, 3, 3))
        once = normalize(x, "group", 2, np.ones(4), np.zeros(4), eps=1e-24)
        twice = normalize(once, "group", 2, np.ones(4), np.zeros(4), eps=1e-24)
        self.assertLess(np.max(np.abs(twice - once)), 1e-12)

    def test_constant_maps_to_zero(self):
        """constant input gives zeros"""
        for kind in ("layer", "group"):
            with self.subTest(kind=kind):
                out = normalize(np.full((1, 4, 2, 2), 3.0), kind, 2, np.ones(4), np.zeros(4))
                self.assertTrue(np.array_equal(out, np.zeros_like(out)))

    def test_affine_law(self):
        """gamma 2, beta 1 gives 2 * normalize(x) + 1"""
        x = np.random.default_rng(6).normal(size=(2, 4, 3, 3))
        plain = normalize(x, "layer", 1, np.ones(4), np.zeros(4))
        scaled = normalize(x, "layer", 1, np.full(4, 2.0), np.ones(4))
        self.assertLess(np.max(np.abs(scaled - (2 * plain + 1))), 1e-10)

    def test_layer_moments_per_position(self):
        """layer kind normalizes the channel axis at every position"""
        x = np.random.default_rng(7).normal(size=(1, 6, 3, 3)) * 4 + 2
        out = normalize(x, "layer", 1, np.ones(6), np.zeros(6))
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-4)

    def test_token_sequence_last_axis(self):
        """rank-3 inputs normalize the feature axis"""
        x = np.random.default_rng(8).normal(size=(2, 5, 4))
        out = normalize(x, "layer", 1, np.ones(4), np.zeros(4))
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)

    def test_groups_must_divide(self):
        """C not divisible by num_groups is rejected"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            normalize(np.ones((1, 3, 2, 2)), "group", 2, np.ones(3), np.zeros(3))
        self.assertEqual("num_groups=2 does not divide C=3", cm_obj.exception.message)

    def test_unknown_kind(self):
        """unknown normalization kind is rejected"""
        with self.assertRaises(FusionKernelException):
            normalize(np.ones((1, 2, 2, 2)), "batch", 1, np.ones(2), np.zeros(2))


class TestActivate(TestCase):
    """activate tests"""
    def test_symmetry_point(self):
        """sigmoid(0) = 0.5 and silu(0) = 0"""
        zero = np.zeros((1, 1, 1, 1))
        self.assertEqual(0.5, activate(zero, "sigmoid")[0, 0, 0, 0])
        self.assertEqual(0.0, activate(zero, "silu")[0, 0, 0, 0])

    def test_uniform_softmax(self):
        """zero logits give 1/3 per channel"""
        out = activate(np.zeros((1, 3, 2, 2)), "softmax_over_channels")
        np.testing.assert_allclose(out, 1.0 / 3.0, atol=1e-15)

    def test_closed_form_softmax(self):
        """logits (ln 2, 0, 0) give (0.5, 0.25, 0.25)"""
        logits = np.array([np.log(2.0), 0.0, 0.0]).reshape(1, 3, 1, 1)
        out = activate(logits, "softmax_over_channels").ravel()
        np.testing.assert_allclose(out, [0.5, 0.25, 0.25], atol=1e-15)

    def test_softmax_large_logits(self):
        """softmax stays finite, positive and normalized on large logits"""
        logits = np.random.default_rng(9).normal(size=(2, 3, 4, 4)) * 50
        out = activate(logits, "softmax_over_channels")
        self.assertLess(np.max(np.abs(out.sum(axis=1) - 1.0)), 1e-12)
        self.assertTrue(np.all(np.isfinite(out)))

    def test_sigmoid_range(self):
        """sigmoid stays inside (0, 1) on moderate inputs"""
        out = activate(np.linspace(-30, 30, 61).reshape(1, 61, 1, 1), "sigmoid")
        self.assertTrue(np.all((out > 0) & (out < 1)))

    def test_unknown_kind(self):
        """unknown activation kind is rejected"""
        with self.assertRaises(FusionKernelException):
            activate(np.zeros((1, 1, 1, 1)), "relu")


class TestResample(TestCase):
    """resample tests"""
    def test_global_mean(self):
        """global pooling of [[1, 2], [3, 4]] is 2.5"""
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        out = resample(x, "global_avg_pool")
        self.assertEqual((1, 1, 1, 1), out.shape)
        self.assertEqual(2.5, out[0, 0, 0, 0])

    def test_upsample_replicates(self):
        """[[7]] becomes [[7, 7], [7, 7]]"""
        out = resample(np.full((1, 1, 1, 1), 7.0), "upsample_nearest_2x")
        self.assertTrue(np.array_equal(out, np.full((1, 1, 2, 2), 7.0)))

    def test_adaptive_quadrants(self):
        """adaptive (2, 2) on 4x4 gives quadrant means"""
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        out = resample(x, "adaptive_avg_pool", (2, 2))
        expected = [[x[0, 0, :2, :2].mean(), x[0, 0, :2, 2:].mean()],
                    [x[0, 0, 2:, :2].mean(), x[0, 0, 2:, 2:].mean()]]
        np.testing.assert_allclose(out[0, 0], expected, atol=1e-12)

    def test_adaptive_uneven_windows(self):
        """uneven windows follow the floor/ceil partition"""
        x = np.random.default_rng(10).normal(size=(1, 2, 5, 7))
        out = resample(x, "adaptive_avg_pool", (3, 2))
        for i in range(3):
            for j in range(2):
                top, bottom = (i * 5) // 3, -((-(i + 1) * 5) // 3)
                left, right = (j * 7) // 2, -((-(j + 1) * 7) // 2)
                np.testing.assert_allclose(out[:, :, i, j],
                                           x[:, :, top:bottom, left:right].mean(axis=(2, 3)))

    def test_global_equals_adaptive_one(self):
        """global pooling equals adaptive (1, 1) bit for bit"""
        x = np.random.default_rng(11).normal(size=(2, 3, 5, 6))
        self.assertTrue(np.array_equal(resample(x, "global_avg_pool"),
                                       resample(x, "adaptive_avg_pool", (1, 1))))

    def test_invalid_target(self):
        """targets outside [1, H] x [1, W] are rejected"""
        for target in ((0, 1), (5, 1), (1, 9)):
            with self.subTest(target=target):
                with self.assertRaises(FusionKernelException):
                    resample(np.ones((1, 1, 4, 4)), "adaptive_avg_pool", target)


class TestConcatAndLinear(TestCase):
    """concat_channels, linear and as_tensor tests"""
    def test_concat_shape_and_blocks(self):
        """blocks appear in argument order and are bit-identical"""
        rng = np.random.default_rng(12)
        first, second = rng.normal(size=(2, 2, 3, 3)), rng.normal(size=(2, 3, 3, 3))
        out = concat_channels([first, second])
        self.assertEqual((2, 5, 3, 3), out.shape)
        self.assertTrue(np.array_equal(out[:, :2], first))
        self.assertTrue(np.array_equal(out[:, 2:], second))

    def test_concat_single(self):
        """concat of one tensor is that tensor"""
        x = np.random.default_rng(13).normal(size=(1, 2, 2, 2))
        self.assertTrue(np.array_equal(concat_channels([x]), x))

    def test_concat_mismatch(self):
        """mismatched spatial extents are rejected"""
        with self.assertRaises(FusionKernelException):
            concat_channels([np.ones((1, 1, 2, 2)), np.ones((1, 1, 3, 2))])

    def test_linear(self):
        """linear maps the last axis"""
        weights = LinearWeights(np.array([[1.0, 2.0]]), np.array([0.5]))
        out = linear(np.array([[[1.0, 1.0], [2.0, 0.0]]]), weights)
        np.testing.assert_allclose(out.ravel(), [3.5, 2.5])

    def test_as_tensor_rejects_nan(self):
        """non-finite data is rejected"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            as_tensor([1.0, float("nan")])
        self.assertEqual("Non-finite values in as_tensor", cm_obj.exception.message)
        self.assertEqual("as_tensor", cm_obj.exception.operation)

    def test_as_tensor_rank(self):
        """rank above four is rejected"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            as_tensor(np.zeros((1, 1, 1, 1, 1)))
        self.assertIsNone(cm_obj.exception.operation)
