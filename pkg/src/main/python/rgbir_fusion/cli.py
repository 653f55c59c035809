"""Command-line surface: checks, benchmarks, forward runs, fixtures and weights.

Exit codes: 0 everything passed, 1 a check or fixture failed, 2 usage or I/O error.
"""
import argparse
import json
import logging
from typing import Optional, Sequence

from rgbir_fusion.encoder import (REPORT_CHANNELS, encoder_forward, init_encoder_weights,
                                  level_statistics, parameter_report)
from rgbir_fusion.fixture_manager import FixtureManager
from rgbir_fusion.fusion_config import (DEFAULT_RHO, FIXTURES_PATH, HIDDEN_DIM, EncoderConfig,
                                        ToyBackboneConfig)
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.invariant_suite import FAULTS, fault_overrides, run_invariant_suite
from rgbir_fusion.lfm_adapter import band_energy
from rgbir_fusion.scan_benchmark import BENCH_OPS, bench_scan, format_table
from rgbir_fusion.synthetic_inputs import synth_pair
from rgbir_fusion.utils import parse_float_list, parse_int_list, parse_size, write_json
from rgbir_fusion.weight_store import load_weights, save_weights, store_from_weights

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _encoder_config(hidden: int, size: tuple = (256, 256), seed: int = 0) -> EncoderConfig:
    return EncoderConfig(backbone=ToyBackboneConfig(input_size=tuple(size), seed=seed),
                         hidden_dim=hidden)


def cmd_check(args) -> int:
    """Runs the invariant suite and prints one line per check."""
    report = run_invariant_suite(args.filter, overrides=fault_overrides(args.inject),
                                 workers=args.workers)
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name:<40} measured={result.measured:.3e} "
              f"tolerance={result.tolerance:.3e} {result.detail}".rstrip())
    print(f"{len(report.results) - len(report.failures)}/{len(report.results)} checks passed")
    return report.exit_code


def cmd_bench(args) -> int:
    """Times ss1d and/or naive attention and prints the doubling table."""
    ops = BENCH_OPS if args.op == "both" else (args.op,)
    rows = bench_scan(parse_int_list(args.lengths), args.channels, args.repeats, ops)
    print(format_table(rows))
    return EXIT_OK


def cmd_forward(args) -> int:
    """Encodes one synthetic pair and prints per-level statistics."""
    size = parse_size(args.size)
    config = _encoder_config(args.hidden, size, args.seed)
    rgb, ir = synth_pair(args.seed, size)
    if args.weights:
        store = load_weights(args.weights)
    else:
        store = store_from_weights(init_encoder_weights(config))
    stats = level_statistics(encoder_forward(rgb, ir, store, config))
    if args.dump:
        write_json(args.dump, stats)
        logger.info("Statistics written to %s", args.dump)
    print(json.dumps(stats, indent=2))
    return EXIT_OK


def cmd_fixtures(args) -> int:
    """Generates or verifies the golden fixtures in --dir."""
    manager = FixtureManager(args.dir)
    results = manager.generate() if args.mode == "generate" else manager.verify()
    for result in results:
        print(f"{result.status:<20} {result.name:<18} {result.detail}".rstrip())
    return EXIT_OK if all(result.passed for result in results) else EXIT_FAILED


def cmd_params(args) -> int:
    """Prints the parameter accounting of the ablation variants."""
    for component, variant, count in parameter_report(EncoderConfig(hidden_dim=args.hidden),
                                                      args.channels):
        print(f"{component:<18} {variant:<24} {count:>12,d}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    """Low/high spectral energy shares of synthetic inputs over a cutoff sweep."""
    rgb, ir = synth_pair(args.seed, args.size)
    print(f"{'rho':>6} {'rgb_low':>9} {'rgb_high':>9} {'ir_low':>9} {'ir_high':>9}")
    for rho in parse_float_list(args.rho):
        rgb_low, rgb_high = band_energy(rgb, rho)
        ir_low, ir_high = band_energy(ir, rho)
        print(f"{rho:>6.2f} {rgb_low:>9.4f} {rgb_high:>9.4f} {ir_low:>9.4f} {ir_high:>9.4f}")
    return EXIT_OK


def cmd_init_weights(args) -> int:
    """Writes a seeded weight file for `forward --weights`."""
    store = store_from_weights(init_encoder_weights(_encoder_config(args.hidden, seed=args.seed)))
    save_weights(store, args.out)
    print(f"Wrote {len(store)} tensors to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-command per harness entry point."""
    parser = argparse.ArgumentParser(prog="rgbir_fusion",
                                     description="RGB-infrared fusion kernel harness")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="run the invariant suite")
    check.add_argument("--filter", default=None, help="check name substring or glob")
    check.add_argument("--workers", type=int, default=1)
    check.add_argument("--inject", action="append", choices=sorted(FAULTS), default=None,
                       help="swap in a known-bad operation (repeatable)")
    check.set_defaults(handler=cmd_check)

    bench = commands.add_parser("bench", help="linear scan vs quadratic attention timings")
    bench.add_argument("--op", choices=("ss1d", "attn", "both"), default="both")
    bench.add_argument("--lengths", default="1024,2048,4096")
    bench.add_argument("--channels", type=int, default=16)
    bench.add_argument("--repeats", type=int, default=20)
    bench.set_defaults(handler=cmd_bench)

    forward = commands.add_parser("forward", help="encode a synthetic RGB/IR pair")
    forward.add_argument("--size", default="256x256", help="HxW, multiples of 32")
    forward.add_argument("--seed", type=int, default=0)
    forward.add_argument("--hidden", type=int, default=HIDDEN_DIM)
    forward.add_argument("--weights", default=None, help="weight file from init-weights")
    forward.add_argument("--dump", default=None, help="write statistics JSON here")
    forward.set_defaults(handler=cmd_forward)

    fixtures = commands.add_parser("fixtures", help="golden fixture files")
    fixtures.add_argument("mode", choices=("generate", "verify"))
    fixtures.add_argument("--dir", default=FIXTURES_PATH)
    fixtures.set_defaults(handler=cmd_fixtures)

    params = commands.add_parser("params", help="parameter accounting")
    params.add_argument("--hidden", type=int, default=HIDDEN_DIM)
    params.add_argument("--channels", type=int, default=REPORT_CHANNELS)
    params.set_defaults(handler=cmd_params)

    spectrum = commands.add_parser("spectrum", help="spectral energy shares per cutoff ratio")
    spectrum.add_argument("--rho", default=f"0.3,0.4,{DEFAULT_RHO},0.6")
    spectrum.add_argument("--size", type=int, default=64)
    spectrum.add_argument("--seed", type=int, default=0)
    spectrum.set_defaults(handler=cmd_spectrum)

    init_weights = commands.add_parser("init-weights", help="write a seeded weight file")
    init_weights.add_argument("--seed", type=int, default=0)
    init_weights.add_argument("--out", required=True)
    init_weights.add_argument("--hidden", type=int, default=HIDDEN_DIM)
    init_weights.set_defaults(handler=cmd_init_weights)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parses ``argv`` and runs the chosen sub-command; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return EXIT_OK if ex.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except FusionKernelException as ex:
        logger.error("%s", ex.message)
        return EXIT_USAGE
