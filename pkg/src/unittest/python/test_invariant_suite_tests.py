"""Invariant suite test cases"""
from unittest import TestCase

import numpy as np

from rgbir_fusion import FusionKernelException, run_invariant_suite
from rgbir_fusion.invariant_suite import (FAULTS, Measurement, check_names, fault_overrides,
                                          invariant, select_checks)
from rgbir_fusion.selective_scan import ss1d_scan


def future_leaking_scan(inputs):
    """a forward scan whose output at t also sees u at t + 1"""
    leaked = np.roll(inputs.u, -1, axis=1)
    leaked[:, -1] = 0.0
    return ss1d_scan(inputs) + 0.5 * leaked


class TestCheckRegistry(TestCase):
    """registration and selection tests"""
    def test_enough_checks(self):
        """at least 25 named checks over every module"""
        names = check_names()
        self.assertGreaterEqual(len(names), 25)
        for prefix in ("tensor.", "ss1d.", "ss2d.", "region.", "cei.", "mpf.", "adapter.",
                       "encoder.", "weights."):
            with self.subTest(prefix=prefix):
                self.assertTrue(any(name.startswith(prefix) for name in names))

    def test_substring_filter(self):
        """'ss1d' selects only ss1d.* checks"""
        selected = select_checks("ss1d")
        self.assertTrue(selected)
        self.assertTrue(all(name.startswith("ss1d.") for name in selected))

    def test_glob_filter(self):
        """glob patterns are matched against whole names"""
        self.assertEqual(["adapter.mask_enumeration"], select_checks("adapter.mask_enum*"))

    def test_no_filter(self):
        """an empty filter selects everything"""
        self.assertEqual(check_names(), select_checks(None))
        self.assertEqual(check_names(), select_checks(""))

    def test_unknown_filter(self):
        """a filter matching nothing is rejected"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            select_checks("does_not_exist")
        self.assertEqual("No invariant check matches filter: does_not_exist",
                         cm_obj.exception.message)

    def test_duplicate_registration(self):
        """a name can be registered once"""
        with self.assertRaises(FusionKernelException) as cm_obj:
            invariant("ss1d.prefix_sum")(lambda _ops: Measurement(0.0, 0.0))
        self.assertEqual("Duplicate invariant name: ss1d.prefix_sum", cm_obj.exception.message)

    def test_measurement(self):
        """measured <= tolerance passes and NaN never does"""
        self.assertTrue(Measurement(1e-7, 1e-6).passed)
        self.assertTrue(Measurement(0.0, 0.0).passed)
        self.assertFalse(Measurement(2e-6, 1e-6).passed)
        self.assertFalse(Measurement(float("nan"), 1.0).passed)


class TestRunSuite(TestCase):
    """run_invariant_suite tests"""
    def test_ss1d_group_passes(self):
        """the reference scan passes every ss1d check"""
        report = run_invariant_suite("ss1d")
        self.assertTrue(report.passed, report.failures)
        self.assertEqual(0, report.exit_code)

    def test_fast_groups_pass(self):
        """tensor, ss2d, region, adapter, weights and config checks pass"""
        for pattern in ("tensor.*", "ss2d.*", "region.*", "adapter.*", "weights.*", "config.*"):
            with self.subTest(pattern=pattern):
                report = run_invariant_suite(pattern)
                self.assertTrue(report.passed, report.failures)

    def test_fused_groups_pass(self):
        """cei, mpf and encoder checks pass on two workers"""
        for pattern in ("cei.*", "mpf.*", "encoder.*"):
            with self.subTest(pattern=pattern):
                report = run_invariant_suite(pattern, workers=2)
                self.assertTrue(report.results)
                self.assertTrue(report.passed, report.failures)

    def test_fault_injected_backward(self):
        """a backward with a doubled du fails the gradient checks"""
        report = run_invariant_suite("ss1d", overrides=fault_overrides(["doubled_du"]))
        self.assertIn("ss1d.gradient_finite_difference", report.failures)
        self.assertIn("ss1d.prefix_sum_jacobian", report.failures)
        self.assertNotIn("ss1d.prefix_sum", report.failures)
        self.assertEqual(1, report.exit_code)

    def test_fault_injected_forward(self):
        """a shifted forward scan fails the prefix-sum check"""
        report = run_invariant_suite("ss1d.prefix_sum", overrides=fault_overrides(["scan_offset"]))
        self.assertIn("ss1d.prefix_sum", report.failures)

    def test_future_leak_fails_causality(self):
        """a scan reading one step ahead is caught at every cut point"""
        report = run_invariant_suite("ss1d.causality", overrides={"ss1d_scan": future_leaking_scan})
        self.assertEqual(["ss1d.causality"], report.failures)

    def test_late_leak_fails_causality(self):
        """a leak confined to the last step is still caught"""
        def last_step_leak(inputs):
            out = ss1d_scan(inputs).copy()
            out[:, -2] += inputs.u[:, -1]
            return out
        report = run_invariant_suite("ss1d.causality", overrides={"ss1d_scan": last_step_leak})
        self.assertFalse(report.passed)

    def test_fault_overrides(self):
        """each named fault replaces one operation"""
        for name, (operation, replacement) in FAULTS.items():
            with self.subTest(name=name):
                self.assertEqual({operation: replacement}, fault_overrides([name]))
        self.assertEqual({}, fault_overrides(None))
        with self.assertRaises(FusionKernelException) as cm_obj:
            fault_overrides(["meltdown"])
        self.assertEqual("Unknown fault: meltdown", cm_obj.exception.message)

    def test_measured_values_reported(self):
        """each result carries its measurement and tolerance"""
        result = run_invariant_suite("ss1d.gradient_finite_difference").results[0]
        self.assertLessEqual(result.measured, result.tolerance)
        self.assertEqual(1e-6, result.tolerance)
        self.assertTrue(np.isfinite(result.measured))

    def test_unknown_override(self):
        """overrides must name a known operation"""
        with self.assertRaises(FusionKernelException):
            run_invariant_suite("ss1d", overrides={"ss3d_scan": ss1d_scan})
