"""Region-aware SS2D test cases"""
import dataclasses
from unittest import TestCase

import numpy as np

from rgbir_fusion import (CHANNEL_GROUPS, LOW_RANK, FusionKernelException, init_region_ss2d,
                          parameter_count, region_aware_ss2d)
from rgbir_fusion.fusion_config import FOUR_WAY_DIRECTIONS
from rgbir_fusion.region_scan import (dense_parameter_count, dense_ss2d_parameter_count,
                                      low_rank_parameter_count)


class TestRegionAwareSS2D(TestCase):
    """region_aware_ss2d tests"""
    def setUp(self):
        """seeded 8-channel block"""
        self.weights = init_region_ss2d(np.random.default_rng(0), 8)

    def test_defaults(self):
        """rank 4, two channel groups, horizontal and vertical scans"""
        self.assertEqual(4, self.weights.rank)
        self.assertEqual(4, LOW_RANK)
        self.assertEqual(2, self.weights.groups)
        self.assertEqual(2, CHANNEL_GROUPS)
        self.assertEqual(("h_fwd", "v_fwd"), self.weights.directions)
        self.assertEqual(4, self.weights.u_proj_down.out_channels)

    def test_multi_scale(self):
        """one weight instance serves 32x32 and 16x16 inputs"""
        rng = np.random.default_rng(1)
        for size in (32, 16):
            with self.subTest(size=size):
                x = rng.normal(size=(1, 8, size, size))
                out = region_aware_ss2d(x, self.weights)
                self.assertEqual(x.shape, out.shape)
                self.assertTrue(np.all(np.isfinite(out)))

    def test_non_square(self):
        """rectangular maps keep their extents"""
        x = np.random.default_rng(2).normal(size=(2, 8, 3, 7))
        self.assertEqual(x.shape, region_aware_ss2d(x, self.weights).shape)

    def test_zero_input(self):
        """zero input with zero biases gives a zero output"""
        out = region_aware_ss2d(np.zeros((1, 8, 5, 5)), self.weights)
        self.assertFalse(np.any(out))

    def test_output_bias_only(self):
        """zero input returns the output projection bias everywhere"""
        bias = np.arange(8.0)
        weights = dataclasses.replace(
            self.weights, out_proj=dataclasses.replace(self.weights.out_proj, bias=bias))
        out = region_aware_ss2d(np.zeros((1, 8, 3, 3)), weights)
        self.assertTrue(np.array_equal(out, np.broadcast_to(bias[None, :, None, None], out.shape)))

    def test_four_way(self):
        """the four-way variant holds one state matrix per direction"""
        weights = init_region_ss2d(np.random.default_rng(3), 8, directions=FOUR_WAY_DIRECTIONS)
        self.assertEqual(FOUR_WAY_DIRECTIONS, weights.directions)
        x = np.random.default_rng(4).normal(size=(1, 8, 4, 4))
        self.assertEqual(x.shape, region_aware_ss2d(x, weights).shape)

    def test_deterministic(self):
        """same weights and input give bit-identical outputs"""
        x = np.random.default_rng(5).normal(size=(1, 8, 6, 6))
        self.assertTrue(np.array_equal(region_aware_ss2d(x, self.weights),
                                       region_aware_ss2d(x, self.weights)))

    def test_odd_channels_rejected(self):
        """odd C cannot be split into two groups"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            init_region_ss2d(np.random.default_rng(6), 7)
        self.assertEqual("Region-aware SS2D needs C divisible by 2 groups, got C=7",
                         cm_obj.exception.message)

    def test_width_mismatch_rejected(self):
        """inputs at another width are rejected"""
        with self.assertRaises(FusionKernelException):
            region_aware_ss2d(np.zeros((1, 6, 4, 4)), self.weights)

    def test_non_finite_rejected(self):
        """a non-finite input is rejected"""
        x = np.zeros((1, 8, 4, 4))
        x[0, 0, 0, 0] = np.inf
        with self.assertRaises(FusionKernelException):
            region_aware_ss2d(x, self.weights)


class TestParameterAccounting(TestCase):
    """low-rank parameter accounting tests"""
    def test_drive_projection_counts(self):
        """dense 65,536 vs low-rank 2,048 at C = 256 is a 32x reduction"""
        self.assertEqual(65536, dense_parameter_count(256))
        self.assertEqual(2048, low_rank_parameter_count(256))
        self.assertEqual(32, dense_parameter_count(256) // low_rank_parameter_count(256))

    def test_drive_projection_matches_weights(self):
        """the stored low-rank pair holds exactly 2Cr parameters"""
        weights = init_region_ss2d(np.random.default_rng(7), 256)
        self.assertEqual(2048, parameter_count([weights.u_proj_down, weights.u_proj_up]))

    def test_module_below_quarter_of_dense(self):
        """the whole block stays under 25% of a dense SS2D at C = 256"""
        weights = init_region_ss2d(np.random.default_rng(8), 256)
        self.assertLess(parameter_count(weights), 0.25 * dense_ss2d_parameter_count(256))

    def test_dense_reference_arithmetic(self):
        """dense SS2D reference at C = 256, N = 16"""
        self.assertEqual(567296, dense_ss2d_parameter_count(256, 16))
