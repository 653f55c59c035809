"""Named, deterministic property checks over every kernel.

Each check returns a Measurement (measured error and the tolerance it must
not exceed). Checks are registered with the ``invariant`` decorator and run
through ``run_invariant_suite``, optionally filtered by name and with
operations swapped out for fault injection.
"""
import dataclasses
import fnmatch
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from rgbir_fusion import fusion_config
from rgbir_fusion.cei_module import ModalityPair, cei_forward, cei_gates, init_cei
from rgbir_fusion.encoder import encode, init_encoder_weights
from rgbir_fusion.fusion_config import EncoderConfig, ToyBackboneConfig
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.gradient_check import check_scan_gradients, random_scan_inputs
from rgbir_fusion.lfm_adapter import (adapter_forward, band_energy, centred_spectrum,
                                      frequency_bands, frequency_split, init_adapter,
                                      inverse_centred_spectrum, low_frequency_mask,
                                      router_weights)
from rgbir_fusion.pyramid_fusion import (JUNCTIONS, attention_weights, completion_branch,
                                         init_completion, init_mpf, mpf_forward)
from rgbir_fusion.region_scan import (dense_parameter_count, dense_ss2d_parameter_count,
                                      init_region_ss2d, low_rank_parameter_count,
                                      region_aware_ss2d)
from rgbir_fusion.selective_scan import (DIRECTIONS, DirectionParams, ScanInputs,
                                         fold_direction, ss1d_backward, ss1d_scan, ss2d,
                                         unfold_direction)
from rgbir_fusion.synthetic_inputs import synth_pair
from rgbir_fusion.tensor_core import (LinearWeights, activate, conv2d, normalize, resample)
from rgbir_fusion.weight_init import delta_conv, init_conv, init_norm
from rgbir_fusion.weight_store import (WeightStore, load_weights, parameter_count,
                                       save_weights)

logger = logging.getLogger(__name__)

DEFAULT_OPERATIONS = {
    "ss1d_scan": ss1d_scan,
    "ss1d_backward": ss1d_backward,
    "cei_forward": cei_forward,
    "adapter_forward": adapter_forward,
    "mpf_forward": mpf_forward,
}
GLOB_CHARS = "*?["


def _scan_offset_fault(inputs: ScanInputs):
    return ss1d_scan(inputs) + 1e-3


def _doubled_du_fault(inputs: ScanInputs, cotangent):
    grads = ss1d_backward(inputs, cotangent)
    return dataclasses.replace(grads, u=2.0 * grads.u)


# Known-bad operations for exercising the suite itself: name -> (operation, replacement)
FAULTS = {
    "scan_offset": ("ss1d_scan", _scan_offset_fault),
    "doubled_du": ("ss1d_backward", _doubled_du_fault),
}


def fault_overrides(names) -> dict:
    """DEFAULT_OPERATIONS overrides for the named FAULTS."""
    overrides = {}
    for name in names or ():
        if name not in FAULTS:
            raise FusionKernelException(f"Unknown fault: {name}")
        operation, replacement = FAULTS[name]
        overrides[operation] = replacement
    return overrides


@dataclass(frozen=True)
class Measurement:
    """Measured error of one property and the largest value that still passes"""
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        """measured <= tolerance (NaN never passes)"""
        return bool(self.measured <= self.tolerance)


@dataclass(frozen=True)
class CheckResult:
    """One line of the suite report"""
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class SuiteReport:
    """Results in registration order"""
    results: tuple

    @property
    def passed(self) -> bool:
        """True when every check passed"""
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> list:
        """Names of the failed checks"""
        return [result.name for result in self.results if not result.passed]

    @property
    def exit_code(self) -> int:
        """0 when all checks pass, 1 otherwise"""
        return 0 if self.passed else 1


_CHECKS = {}


def invariant(name: str) -> Callable:
    """Registers the decorated ``check(ops) -> Measurement`` under ``name``."""
    def register(check: Callable) -> Callable:
        if name in _CHECKS:
            raise FusionKernelException(f"Duplicate invariant name: {name}")
        _CHECKS[name] = check
        return check
    return register


def check_names() -> list:
    """Every registered check name, in registration order."""
    return list(_CHECKS)


def select_checks(pattern: Optional[str] = None) -> list:
    """Names matching ``pattern``: a glob, or a plain substring when it has no wildcards."""
    if not pattern:
        return check_names()
    glob = pattern if any(char in pattern for char in GLOB_CHARS) else f"*{pattern}*"
    selected = [name for name in _CHECKS if fnmatch.fnmatchcase(name, glob)]
    if not selected:
        raise FusionKernelException(f"No invariant check matches filter: {pattern}")
    return selected


def _run_one(name: str, ops: Mapping[str, Callable]) -> CheckResult:
    try:
        measurement = _CHECKS[name](ops)
    except Exception as ex:  # pylint: disable=broad-exception-caught
        logger.error("Check %s raised %s", name, ex)
        return CheckResult(name, False, float("nan"), float("nan"), f"raised: {ex}")
    result = CheckResult(name, measurement.passed, float(measurement.measured),
                         float(measurement.tolerance))
    logger.debug("Check %s measured %.3e (tolerance %.3e)", name, result.measured,
                 result.tolerance)
    return result


def run_invariant_suite(pattern: Optional[str] = None,
                        overrides: Optional[Mapping[str, Callable]] = None,
                        workers: int = 1) -> SuiteReport:
    """Runs the selected checks; ``overrides`` replaces entries of DEFAULT_OPERATIONS."""
    unknown = set(overrides or {}) - set(DEFAULT_OPERATIONS)
    if unknown:
        raise FusionKernelException(f"Unknown operation override: {sorted(unknown)}")
    ops = dict(DEFAULT_OPERATIONS, **(overrides or {}))
    names = select_checks(pattern)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = tuple(pool.map(lambda name: _run_one(name, ops), names))
    else:
        results = tuple(_run_one(name, ops) for name in names)
    report = SuiteReport(results)
    logger.info("Invariant suite: %d/%d checks passed", len(names) - len(report.failures),
                len(names))
    return report


def _max_abs(value) -> float:
    return float(np.max(np.abs(value), initial=0.0))


def _exact(condition: bool) -> Measurement:
    return Measurement(0.0 if condition else 1.0, 0.0)


def _cumsum_params(batch: int, length: int, channels: int) -> DirectionParams:
    return DirectionParams(delta=np.ones((batch, length, channels)),
                           A=np.zeros((channels, 1)),
                           B_seq=np.ones((batch, length, 1)),
                           C_seq=np.ones((batch, length, 1)))


def _random_params(rng: np.random.Generator, batch: int, length: int, channels: int,
                   state: int = 4) -> DirectionParams:
    return DirectionParams(delta=rng.uniform(0.05, 0.5, size=(batch, length, channels)),
                           A=-rng.uniform(0.1, 2.0, size=(channels, state)),
                           B_seq=rng.normal(size=(batch, length, state)),
                           C_seq=rng.normal(size=(batch, length, state)))


def _random_levels(rng: np.random.Generator, size: int, channels=(4, 8, 8)) -> list:
    levels = []
    for level, width in zip(fusion_config.PYRAMID_LEVELS, channels):
        extent = size // 2 ** level
        levels.append(ModalityPair(rng.normal(size=(1, width, extent, extent)),
                                   rng.normal(size=(1, width, extent, extent)), level))
    return levels


# tensor core

@invariant("tensor.conv2d_linearity")
def _conv_linearity(_ops) -> Measurement:
    rng = np.random.default_rng(101)
    weights = init_conv(rng, 3, 2, 3, bias=False)
    x, y = rng.normal(size=(2, 1, 2, 4, 4))
    mixed = conv2d(1.7 * x - 0.6 * y, weights)
    return Measurement(_max_abs(mixed - (1.7 * conv2d(x, weights) - 0.6 * conv2d(y, weights))),
                       1e-10)


@invariant("tensor.conv2d_delta_identity")
def _conv_delta(_ops) -> Measurement:
    x = np.random.default_rng(102).normal(size=(2, 3, 5, 4))
    return _exact(np.array_equal(conv2d(x, delta_conv(3)), x))


@invariant("tensor.normalize_affine_law")
def _normalize_affine(_ops) -> Measurement:
    x = np.random.default_rng(103).normal(size=(2, 4, 3, 3))
    error = 0.0
    for kind, groups in (("layer", 1), ("group", 2)):
        plain = normalize(x, kind, groups, np.ones(4), np.zeros(4))
        scaled = normalize(x, kind, groups, np.full(4, 2.0), np.ones(4))
        error = max(error, _max_abs(scaled - (2.0 * plain + 1.0)))
    return Measurement(error, 1e-10)


@invariant("tensor.normalize_fixed_point")
def _normalize_fixed_point(_ops) -> Measurement:
    norm = init_norm(4)
    x = normalize(np.random.default_rng(104).normal(size=(1, 4, 3, 3)), "group", 2,
                  norm.gamma, norm.beta, eps=1e-24)
    again = normalize(x, "group", 2, norm.gamma, norm.beta, eps=1e-24)
    constant = normalize(np.full((1, 4, 3, 3), 7.5), "group", 2, norm.gamma, norm.beta)
    return Measurement(max(_max_abs(again - x), _max_abs(constant)), 1e-12)


@invariant("tensor.softmax_stochastic")
def _softmax(_ops) -> Measurement:
    probs = activate(np.random.default_rng(105).normal(size=(2, 3, 4, 4)) * 5.0,
                     "softmax_over_channels")
    if np.any(probs <= 0):
        return Measurement(float("inf"), 1e-12)
    return Measurement(_max_abs(probs.sum(axis=1) - 1.0), 1e-12)


@invariant("tensor.global_pool_composition")
def _global_pool(_ops) -> Measurement:
    x = np.random.default_rng(106).normal(size=(2, 3, 5, 7))
    return _exact(np.array_equal(resample(x, "global_avg_pool"),
                                 resample(x, "adaptive_avg_pool", (1, 1))))


@invariant("tensor.purity")
def _purity(_ops) -> Measurement:
    rng = np.random.default_rng(107)
    x = rng.normal(size=(1, 2, 4, 4))
    snapshot = x.copy()
    weights = init_conv(rng, 2, 2, 3)
    first, second = conv2d(x, weights), conv2d(x, weights)
    return _exact(np.array_equal(first, second) and np.array_equal(x, snapshot))


# selective scan

@invariant("ss1d.prefix_sum")
def _prefix_sum(ops) -> Measurement:
    inputs = ScanInputs(u=np.array([[[1.0], [2.0], [3.0]]]), delta=np.ones((1, 3, 1)),
                        A=np.zeros((1, 1)), B_seq=np.ones((1, 3, 1)), C_seq=np.ones((1, 3, 1)))
    return Measurement(_max_abs(ops["ss1d_scan"](inputs).ravel() - [1.0, 3.0, 6.0]), 1e-12)


@invariant("ss1d.single_step")
def _single_step(ops) -> Measurement:
    inputs = ScanInputs(u=np.full((1, 1, 1), 4.0), delta=np.full((1, 1, 1), 0.5),
                        A=np.full((1, 1), -1.0), B_seq=np.full((1, 1, 1), 2.0),
                        C_seq=np.full((1, 1, 1), 3.0))
    return Measurement(_max_abs(ops["ss1d_scan"](inputs) - 12.0), 1e-12)


@invariant("ss1d.linearity_in_u")
def _scan_linearity(ops) -> Measurement:
    rng = np.random.default_rng(110)
    inputs = random_scan_inputs(rng, 2, 12, 3, 4)
    other = rng.normal(size=inputs.u.shape)
    scan = ops["ss1d_scan"]
    mixed = scan(dataclasses.replace(inputs, u=0.8 * inputs.u - 1.3 * other))
    split = 0.8 * scan(inputs) - 1.3 * scan(dataclasses.replace(inputs, u=other))
    return Measurement(_max_abs(mixed - split), 1e-10)


@invariant("ss1d.causality")
def _causality(ops) -> Measurement:
    inputs = random_scan_inputs(np.random.default_rng(111), 1, 8, 2, 3)
    base = ops["ss1d_scan"](inputs)
    # every cut t: inputs at positions >= t never reach outputs before t
    for cut in range(1, inputs.u.shape[1]):
        perturbed_u = inputs.u.copy()
        perturbed_u[:, cut:] += 10.0
        perturbed = ops["ss1d_scan"](dataclasses.replace(inputs, u=perturbed_u))
        if not np.array_equal(base[:, :cut], perturbed[:, :cut]):
            return _exact(False)
    return _exact(True)


@invariant("ss1d.gradient_finite_difference")
def _gradient(ops) -> Measurement:
    rng = np.random.default_rng(112)
    worst = 0.0
    for _ in range(10):
        inputs = random_scan_inputs(rng)
        report = check_scan_gradients(inputs, rng.normal(size=inputs.u.shape),
                                      backward=ops["ss1d_backward"])
        worst = max(worst, report.max_error)
    return Measurement(worst, 1e-6)


@invariant("ss1d.zero_cotangent")
def _zero_cotangent(ops) -> Measurement:
    inputs = random_scan_inputs(np.random.default_rng(113))
    grads = ops["ss1d_backward"](inputs, np.zeros_like(inputs.u))
    return Measurement(max(_max_abs(getattr(grads, name))
                           for name in ("u", "delta", "A", "B_seq", "C_seq")), 0.0)


@invariant("ss1d.prefix_sum_jacobian")
def _prefix_jacobian(ops) -> Measurement:
    length = 5
    inputs = ScanInputs(u=np.arange(1.0, length + 1).reshape(1, length, 1),
                        delta=np.ones((1, length, 1)), A=np.zeros((1, 1)),
                        B_seq=np.ones((1, length, 1)), C_seq=np.ones((1, length, 1)))
    grads = ops["ss1d_backward"](inputs, np.ones((1, length, 1)))
    return Measurement(_max_abs(grads.u.ravel() - np.arange(length, 0, -1)), 1e-12)


@invariant("ss1d.long_sequence_stability")
def _stability(ops) -> Measurement:
    rng = np.random.default_rng(114)
    length = 10_000
    inputs = ScanInputs(u=rng.uniform(-1.0, 1.0, size=(1, length, 2)),
                        delta=rng.uniform(0.01, 0.1, size=(1, length, 2)),
                        A=-rng.uniform(0.0, 1.0, size=(2, 1)),
                        B_seq=rng.uniform(-1.0, 1.0, size=(1, length, 1)),
                        C_seq=np.ones((1, length, 1)))
    states = ops["ss1d_scan"](inputs)
    bound = np.cumsum(np.abs(inputs.delta * inputs.B_seq * inputs.u), axis=1)
    return Measurement(float(np.max(np.abs(states) - bound)), 1e-9)


# directional scans

@invariant("ss2d.fold_unfold_identity")
def _fold_unfold(_ops) -> Measurement:
    rng = np.random.default_rng(120)
    exact = True
    for shape in ((1, 3, 3, 5), (2, 2, 8, 8)):
        x = rng.normal(size=shape)
        for direction in DIRECTIONS:
            folded = fold_direction(unfold_direction(x, direction), direction, *shape[2:])
            exact = exact and np.array_equal(folded, x)
    return _exact(exact)


@invariant("ss2d.prefix_sum_per_direction")
def _ss2d_prefix(_ops) -> Measurement:
    x = np.random.default_rng(121).normal(size=(1, 2, 3, 4))
    error = 0.0
    for direction in DIRECTIONS:
        out = ss2d(x, {direction: _cumsum_params(1, 12, 2)})
        expected = np.cumsum(unfold_direction(x, direction), axis=1)
        error = max(error, _max_abs(unfold_direction(out, direction) - expected))
    return Measurement(error, 1e-12)


@invariant("ss2d.transpose_symmetry")
def _ss2d_symmetry(_ops) -> Measurement:
    rng = np.random.default_rng(122)
    x = rng.normal(size=(1, 2, 5, 5))
    x = x + x.transpose(0, 1, 3, 2)
    params = _random_params(rng, 1, 25, 2)
    horizontal = ss2d(x, {"h_fwd": params})
    vertical = ss2d(x, {"v_fwd": params})
    return _exact(np.array_equal(vertical, horizontal.transpose(0, 1, 3, 2)))


@invariant("ss2d.shape_law")
def _ss2d_shape(_ops) -> Measurement:
    rng = np.random.default_rng(123)
    x = rng.normal(size=(2, 3, 4, 6))
    same = True
    for directions in (("h_fwd",), fusion_config.SCAN_DIRECTIONS, DIRECTIONS):
        out = ss2d(x, {d: _random_params(rng, 2, 24, 3) for d in directions})
        same = same and out.shape == x.shape
    return _exact(same)


@invariant("region.multi_scale")
def _region_multi_scale(_ops) -> Measurement:
    weights = init_region_ss2d(np.random.default_rng(124), 8)
    rng = np.random.default_rng(125)
    shapes_ok = all(region_aware_ss2d(x, weights).shape == x.shape
                    for x in (rng.normal(size=(1, 8, 32, 32)), rng.normal(size=(1, 8, 16, 16))))
    return _exact(shapes_ok)


@invariant("region.low_rank_parameter_count")
def _region_low_rank(_ops) -> Measurement:
    return Measurement(abs(low_rank_parameter_count(256) - 2048)
                       + abs(dense_parameter_count(256) - 65536), 0.0)


@invariant("region.parameter_ratio")
def _region_ratio(_ops) -> Measurement:
    region = init_region_ss2d(np.random.default_rng(126), 256)
    return Measurement(parameter_count(region) / dense_ss2d_parameter_count(256), 0.25)


@invariant("region.zero_input")
def _region_zero(_ops) -> Measurement:
    weights = init_region_ss2d(np.random.default_rng(127), 8)
    return Measurement(_max_abs(region_aware_ss2d(np.zeros((1, 8, 6, 6)), weights)), 0.0)


# commonality-enhancing interaction

@invariant("cei.gate_law")
def _cei_gate_law(ops) -> Measurement:
    rng = np.random.default_rng(130)
    weights = init_cei(rng, 4)
    violations = 0
    for _ in range(100):
        pair = ModalityPair(rng.normal(size=(1, 4, 8, 8)) * rng.uniform(0.1, 5.0),
                            rng.normal(size=(1, 4, 8, 8)) * rng.uniform(0.1, 5.0), 3)
        gates = cei_gates(pair, weights)
        out = ops["cei_forward"](pair, weights)
        violations += sum(int(np.sum((gate <= 0) | (gate >= 1))) for gate in gates)
        for before, after in ((pair.rgb, out.rgb), (pair.ir, out.ir)):
            violations += int(np.sum(np.abs(after) < np.abs(before)))
            violations += int(np.sum(np.sign(after) != np.sign(before)))
    return Measurement(violations, 0)


@invariant("cei.resolution_robustness")
def _cei_resolution(ops) -> Measurement:
    rng = np.random.default_rng(131)
    weights = init_cei(rng, 4)
    shapes_ok = True
    for size in (64, 32):
        pair = ModalityPair(rng.normal(size=(1, 4, size, size)),
                            rng.normal(size=(1, 4, size, size)), 4)
        shapes_ok = shapes_ok and ops["cei_forward"](pair, weights).rgb.shape == pair.rgb.shape
    return _exact(shapes_ok)


@invariant("cei.half_gate")
def _cei_half_gate(ops) -> Measurement:
    rng = np.random.default_rng(132)
    weights = init_cei(rng, 4)
    weights = dataclasses.replace(weights, out_proj=LinearWeights(np.zeros((8, 8)), np.zeros(8)))
    pair = ModalityPair(rng.normal(size=(1, 4, 8, 8)), rng.normal(size=(1, 4, 8, 8)), 5)
    out = ops["cei_forward"](pair, weights)
    return Measurement(max(_max_abs(out.rgb - 1.5 * pair.rgb), _max_abs(out.ir - 1.5 * pair.ir)),
                       0.0)


# pyramid fusion

@invariant("mpf.shape_law")
def _mpf_shapes(ops) -> Measurement:
    rng = np.random.default_rng(140)
    weights = init_mpf(rng, (4, 8, 8), 16)
    shapes_ok = True
    for size in (64, 128, 256):
        features = ops["mpf_forward"](_random_levels(rng, size), weights)
        expected = [(1, 16, size // 8, size // 8), (1, 16, size // 16, size // 16),
                    (1, 16, size // 32, size // 32)]
        shapes_ok = shapes_ok and [t.shape for t in features.as_dict().values()] == expected
    return _exact(shapes_ok)


@invariant("mpf.zero_completion_identity")
def _mpf_zero_completion(ops) -> Measurement:
    rng = np.random.default_rng(141)
    weights = init_mpf(rng, (4, 8, 8), 16, zero_completion=True)
    branch_free = dataclasses.replace(weights, completion={j: {} for j in JUNCTIONS},
                                      completion_side="none")
    levels = _random_levels(rng, 64)
    with_branch = ops["mpf_forward"](levels, weights).as_dict()
    without = ops["mpf_forward"](levels, branch_free).as_dict()
    return _exact(all(np.array_equal(with_branch[k], without[k]) for k in with_branch))


@invariant("mpf.determinism")
def _mpf_determinism(ops) -> Measurement:
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(142)
        weights = init_mpf(rng, (4, 8, 8), 16)
        runs.append(ops["mpf_forward"](_random_levels(rng, 64), weights).as_dict())
    return _exact(all(np.array_equal(runs[0][k], runs[1][k]) for k in runs[0]))


@invariant("mpf.attention_stochastic")
def _attention_stochastic(_ops) -> Measurement:
    rng = np.random.default_rng(143)
    weights = attention_weights(rng.normal(size=(2, 6, 8)), rng.normal(size=(2, 6, 8)))
    return Measurement(_max_abs(weights.sum(axis=1) - 1.0), 1e-12)


@invariant("mpf.completion_bound")
def _completion_bound(_ops) -> Measurement:
    rng = np.random.default_rng(144)
    branch = init_completion(rng, 8, 8)
    ir, fused = rng.normal(size=(2, 1, 8, 6, 6))
    residual = completion_branch(ir, fused, branch)
    ungated = conv2d(region_aware_ss2d(ir, branch.rss2d), branch.dw)
    return Measurement(_max_abs(residual) - _max_abs(ungated), 0.0)


# frequency adapter

@invariant("adapter.mask_enumeration")
def _mask_count(_ops) -> Measurement:
    return Measurement(abs(float(low_frequency_mask(4, 4, 0.5).sum()) - 9.0), 0.0)


@invariant("adapter.mask_partition")
def _mask_partition(_ops) -> Measurement:
    x = np.random.default_rng(150).normal(size=(1, 3, 6, 6))
    split = frequency_split(x, 0.5)
    partition = np.array_equal(split.mask + (1.0 - split.mask), np.ones_like(split.mask))
    return _exact(partition and np.array_equal(split.full, centred_spectrum(x)))


@invariant("adapter.transform_round_trip")
def _round_trip(_ops) -> Measurement:
    x = np.random.default_rng(151).normal(size=(1, 3, 8, 10))
    return Measurement(_max_abs(inverse_centred_spectrum(centred_spectrum(x)) - x), 1e-9)


@invariant("adapter.parseval")
def _parseval(_ops) -> Measurement:
    x = np.random.default_rng(152).normal(size=(1, 4, 8, 8))
    spatial = np.sum(x ** 2, axis=(-2, -1))
    spectral = np.sum(np.abs(centred_spectrum(x)) ** 2, axis=(-2, -1)) / 64.0
    return Measurement(float(np.max(np.abs(spatial - spectral) / spatial)), 1e-8)


@invariant("adapter.band_partition")
def _band_partition(_ops) -> Measurement:
    x = np.random.default_rng(153).normal(size=(1, 3, 8, 8))
    low, high = frequency_bands(x, 0.5)
    return Measurement(_max_abs(low + high - x), 1e-9)


@invariant("adapter.mask_monotone")
def _mask_monotone(_ops) -> Measurement:
    violations = 0
    for height, width in ((8, 8), (6, 10)):
        masks = [low_frequency_mask(height, width, rho) for rho in np.linspace(0.0, 1.0, 11)]
        violations += sum(int(np.sum(a > b)) for a, b in zip(masks, masks[1:]))
    x = np.random.default_rng(154).normal(size=(1, 2, 8, 8))
    _, high = frequency_bands(x, 1.0)
    return Measurement(violations + _max_abs(high), 0.0)


@invariant("adapter.rho_zero_dc")
def _rho_zero(_ops) -> Measurement:
    x = np.random.default_rng(155).normal(size=(1, 3, 8, 8))
    low, _ = frequency_bands(x, 0.0)
    return Measurement(_max_abs(low - x.mean(axis=(-2, -1), keepdims=True)), 1e-9)


@invariant("adapter.band_energy_monotone")
def _band_energy(_ops) -> Measurement:
    x = np.random.default_rng(156).normal(size=(1, 2, 8, 8))
    shares = [band_energy(x, rho)[0] for rho in (0.0, 0.3, 0.5, 0.7, 1.0)]
    drops = sum(max(0.0, a - b) for a, b in zip(shares, shares[1:]))
    return Measurement(drops + abs(shares[-1] - 1.0), 1e-12)


@invariant("adapter.zero_init_identity")
def _adapter_identity(ops) -> Measurement:
    rng = np.random.default_rng(157)
    x = rng.normal(size=(1, 8, 8, 8))
    return _exact(np.array_equal(ops["adapter_forward"](x, init_adapter(rng, 8, 16)), x))


@invariant("adapter.router_stochastic")
def _router(_ops) -> Measurement:
    rng = np.random.default_rng(158)
    weights = init_adapter(rng, 8, 16)
    probs = router_weights(rng.normal(size=(2, 8, 5, 5)) * 3.0, weights)
    if np.any(probs <= 0):
        return Measurement(float("inf"), 1e-12)
    return Measurement(_max_abs(probs.sum(axis=1) - 1.0), 1e-12)


@invariant("adapter.resolution_independence")
def _adapter_resolution(ops) -> Measurement:
    rng = np.random.default_rng(159)
    weights = init_adapter(rng, 8, 16, zero_outputs=False)
    shapes_ok = all(ops["adapter_forward"](x, weights).shape == x.shape
                    for x in (rng.normal(size=(1, 8, s, s)) for s in (8, 16, 32)))
    return _exact(shapes_ok)


# encoder and harness

_SMALL_ENCODER = EncoderConfig(backbone=ToyBackboneConfig(stage_channels=(8, 16, 16),
                                                          stem_channels=8, adapter_dim=16),
                               hidden_dim=16)


@invariant("encoder.shape_contract")
def _encoder_shapes(_ops) -> Measurement:
    rgb, ir = synth_pair(160, 64)
    features = encode(rgb, ir, init_encoder_weights(_SMALL_ENCODER), _SMALL_ENCODER)
    shapes = [t.shape for t in features.as_dict().values()]
    finite = all(np.all(np.isfinite(t)) for t in features.as_dict().values())
    return _exact(finite and shapes == [(1, 16, 8, 8), (1, 16, 4, 4), (1, 16, 2, 2)])


@invariant("encoder.adapter_zero_identity")
def _encoder_adapters(_ops) -> Measurement:
    rgb, ir = synth_pair(161, 64)
    bare = dataclasses.replace(_SMALL_ENCODER, use_adapters=False)
    with_adapters = encode(rgb, ir, init_encoder_weights(_SMALL_ENCODER), _SMALL_ENCODER)
    without = encode(rgb, ir, init_encoder_weights(bare), bare)
    return _exact(all(np.array_equal(a, b) for a, b in
                      zip(with_adapters.as_dict().values(), without.as_dict().values())))


@invariant("weights.round_trip")
def _weights_round_trip(_ops) -> Measurement:
    rng = np.random.default_rng(170)
    store = WeightStore({"a": rng.normal(size=(2, 3)), "b.c": rng.normal(size=(4,)),
                         "d": rng.normal(size=(1, 2, 3, 3))})
    with tempfile.TemporaryDirectory() as folder:
        path = os.path.join(folder, "weights.bin")
        save_weights(store, path)
        return _exact(load_weights(path) == store)


@invariant("weights.bad_magic")
def _weights_bad_magic(_ops) -> Measurement:
    with tempfile.TemporaryDirectory() as folder:
        path = os.path.join(folder, "weights.bin")
        save_weights(WeightStore({"a": np.ones(2)}), path)
        with open(path, "r+b") as file:
            file.write(b"XXXX")
        try:
            load_weights(path)
        except FusionKernelException as ex:
            return _exact(ex.message.startswith("Bad magic"))
    return _exact(False)


@invariant("config.defaults")
def _config_defaults(_ops) -> Measurement:
    rng = np.random.default_rng(180)
    adapter = init_adapter(rng, 8)
    region = init_region_ss2d(rng, 8)
    mismatches = [fusion_config.DEFAULT_RHO != 0.5, fusion_config.ADAPTER_DIM != 128,
                  fusion_config.LOW_RANK != 4, fusion_config.CHANNEL_GROUPS != 2,
                  adapter.rho != 0.5, adapter.adapter_dim != 128,
                  region.rank != 4, region.groups != 2]
    return Measurement(sum(mismatches), 0)
