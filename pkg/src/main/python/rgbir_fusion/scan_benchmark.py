"""Wall-clock scaling of the selective scan against dense self-attention"""
import logging
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from rgbir_fusion.fusion_config import STATE_DIM
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.selective_scan import ScanInputs, ss1d_scan
from rgbir_fusion.tensor_core import Tensor

logger = logging.getLogger(__name__)

BENCH_OPS = ("ss1d", "attn")
DEFAULT_LENGTHS = (1024, 2048, 4096)
DEFAULT_REPEATS = 20


@dataclass(frozen=True)
class BenchRow:
    """Median time of one op at one length; ratio is against the previous length"""
    op: str
    length: int
    median_seconds: float
    ratio: Optional[float] = None


def naive_attention(tokens: Tensor) -> Tensor:
    """Single-head softmax(X X^T / sqrt(C)) X with the full L x L score matrix."""
    scores = tokens @ np.swapaxes(tokens, -1, -2) / np.sqrt(tokens.shape[-1])
    scores = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return (scores / scores.sum(axis=-1, keepdims=True)) @ tokens


def _scan_workload(rng: np.random.Generator, length: int, channels: int) -> Callable:
    inputs = ScanInputs(u=rng.normal(size=(1, length, channels)),
                        delta=rng.uniform(0.01, 0.1, size=(1, length, channels)),
                        A=-np.tile(np.arange(1.0, STATE_DIM + 1), (channels, 1)),
                        B_seq=rng.normal(size=(1, length, STATE_DIM)),
                        C_seq=rng.normal(size=(1, length, STATE_DIM)))
    return lambda: ss1d_scan(inputs)


def _attention_workload(rng: np.random.Generator, length: int, channels: int) -> Callable:
    tokens = rng.normal(size=(1, length, channels)) / np.sqrt(channels)
    return lambda: naive_attention(tokens)


WORKLOADS = {"ss1d": _scan_workload, "attn": _attention_workload}


def median_time(workload: Callable, repeats: int) -> float:
    """Median wall-clock seconds of ``repeats`` calls after one warm-up call."""
    workload()
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        workload()
        timings.append(time.perf_counter() - start)
    return statistics.median(timings)


def bench_scan(lengths: Sequence[int] = DEFAULT_LENGTHS, channels: int = 16,
               repeats: int = DEFAULT_REPEATS, ops: Sequence[str] = BENCH_OPS,
               seed: int = 0) -> list:
    """Median timings per op and length, with the ratio to the previous length."""
    lengths = list(lengths)
    if not lengths or any(length < 1 for length in lengths):
        raise FusionKernelException(f"Benchmark lengths must be positive, got {lengths}")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise FusionKernelException(f"Benchmark lengths must be ascending, got {lengths}")
    if repeats < 1 or channels < 1:
        raise FusionKernelException("Benchmark repeats and channels must be positive")
    unknown = [op for op in ops if op not in WORKLOADS]
    if unknown:
        raise FusionKernelException(f"Unknown benchmark op: {unknown}")
    rng = np.random.default_rng(seed)
    rows = []
    for op in ops:
        previous = None
        for length in lengths:
            seconds = median_time(WORKLOADS[op](rng, length, channels), repeats)
            ratio = None if previous is None else seconds / previous
            rows.append(BenchRow(op, length, seconds, ratio))
            logger.info("bench %s L=%d: %.6f s", op, length, seconds)
            previous = seconds
    return rows


def format_table(rows: Sequence[BenchRow]) -> str:
    """Plain-text table, one row per (op, length)."""
    lines = [f"{'op':<6}{'length':>8}{'median_s':>14}{'ratio':>8}"]
    for row in rows:
        ratio = "" if row.ratio is None else f"{row.ratio:.2f}"
        lines.append(f"{row.op:<6}{row.length:>8}{row.median_seconds:>14.6f}{ratio:>8}")
    return "\n".join(lines)
