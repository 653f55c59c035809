"""Deterministic paired RGB/IR stand-in images"""
import numpy as np

from rgbir_fusion.fusion_config import SIZE_MULTIPLE
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.tensor_core import Tensor

BASE_TERMS = 3
NOISE_SCALE = 0.3
IR_GAIN = 0.8


def _extents(size) -> tuple:
    extents = (size, size) if isinstance(size, int) else tuple(size)
    if len(extents) != 2 or any(int(e) != e or e <= 0 or e % SIZE_MULTIPLE for e in extents):
        raise FusionKernelException(
            f"Synthetic input size must be a positive multiple of {SIZE_MULTIPLE}, got {size}")
    return int(extents[0]), int(extents[1])


def _base_pattern(rng: np.random.Generator, batch: int, height: int, width: int) -> Tensor:
    rows = np.linspace(0.0, 2.0 * np.pi, height, endpoint=False)[:, None]
    cols = np.linspace(0.0, 2.0 * np.pi, width, endpoint=False)[None, :]
    base = np.zeros((batch, height, width))
    for sample in range(batch):
        for _ in range(BASE_TERMS):
            row_freq, col_freq = rng.integers(1, 4, size=2)
            row_phase, col_phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
            base[sample] += (np.sin(row_freq * rows + row_phase) *
                             np.cos(col_freq * cols + col_phase))
    return base


def synth_pair(seed: int, size, batch: int = 1) -> tuple:
    """(rgb (B, 3, H, W), ir (B, 1, H, W)) sharing a smooth base pattern.

    ``size`` is an int for square inputs or an (H, W) pair; both extents must
    be multiples of 32. Each modality adds its own gains and noise.
    """
    height, width = _extents(size)
    rng = np.random.default_rng(seed)
    base = _base_pattern(rng, batch, height, width)
    gains = rng.uniform(0.6, 1.2, size=(batch, 3, 1, 1))
    offsets = rng.uniform(-0.2, 0.2, size=(batch, 3, 1, 1))
    rgb = gains * base[:, None] + offsets + NOISE_SCALE * rng.normal(size=(batch, 3, height, width))
    ir = IR_GAIN * base[:, None] + NOISE_SCALE * rng.normal(size=(batch, 1, height, width))
    return np.ascontiguousarray(rgb), np.ascontiguousarray(ir)


def modality_correlation(rgb: Tensor, ir: Tensor) -> float:
    """Pearson correlation between the RGB channel-mean map and the IR map."""
    return float(np.corrcoef(rgb.mean(axis=1).ravel(), ir[:, 0].ravel())[0, 1])
