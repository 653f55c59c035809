"""Commonality-enhancing interaction: SS1D channel gating of paired RGB/IR features"""
from dataclasses import dataclass

import numpy as np
from einops import rearrange

from rgbir_fusion.fusion_config import (CEI_POOL_TARGET, DELTA_FLOOR, LOW_RANK,
                                        PYRAMID_LEVELS, STATE_DIM)
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.selective_scan import ScanInputs, ss1d_scan
from rgbir_fusion.tensor_core import (LinearWeights, NormWeights, Tensor, activate,
                                      concat_channels, linear, normalize, resample, softplus)
from rgbir_fusion.weight_init import (init_delta_bias, init_linear, init_norm,
                                      init_state_matrix)


@dataclass(frozen=True)
class ModalityPair:
    """RGB and IR feature maps of one pyramid level (3, 4 or 5)."""
    rgb: Tensor
    ir: Tensor
    level: int

    def __post_init__(self):
        if self.rgb.shape != self.ir.shape:
            raise FusionKernelException(
                f"Modality shape mismatch at level {self.level}: "
                f"rgb {self.rgb.shape} vs ir {self.ir.shape}")
        if self.level not in PYRAMID_LEVELS:
            raise FusionKernelException(f"Unknown pyramid level: {self.level}")

    @property
    def channels(self) -> int:
        """Per-modality channel count C"""
        return self.rgb.shape[1]


@dataclass(frozen=True)
class CEIWeights:
    """Low-rank input projection, scan parameter generators, LN and 2C-wide gate head."""
    in_proj_down: LinearWeights
    in_proj_up: LinearWeights
    delta_proj_down: LinearWeights
    delta_proj_up: LinearWeights
    bc_proj: LinearWeights
    A: Tensor
    ln: NormWeights
    out_proj: LinearWeights
    pool_target: tuple = CEI_POOL_TARGET

    @property
    def channels(self) -> int:
        """Per-modality channel count C (the gate head emits 2C logits)"""
        return self.out_proj.weight.shape[0] // 2

    @property
    def state_dim(self) -> int:
        """State dimension N of the channel scan"""
        return self.A.shape[1]


def init_cei(rng: np.random.Generator, channels: int, rank: int = LOW_RANK,
             state_dim: int = STATE_DIM, pool_target: tuple = CEI_POOL_TARGET) -> CEIWeights:
    """Seeded CEI weights for C channels per modality; the scan runs at width 2C."""
    width = 2 * channels
    delta_up = init_linear(rng, width, rank, bias=False)
    return CEIWeights(
        in_proj_down=init_linear(rng, rank, width, bias=False),
        in_proj_up=init_linear(rng, width, rank),
        delta_proj_down=init_linear(rng, rank, width, bias=False),
        delta_proj_up=LinearWeights(delta_up.weight, init_delta_bias(rng, width)),
        bc_proj=init_linear(rng, 2 * state_dim, width, bias=False),
        A=init_state_matrix(width, state_dim),
        ln=init_norm(width),
        out_proj=init_linear(rng, width, width),
        pool_target=tuple(pool_target),
    )


def cei_gates(pair: ModalityPair, w: CEIWeights) -> tuple:
    """Channel gates (W_rgb, W_ir), each (B, C) with entries in (0, 1)."""
    if pair.channels != w.channels:
        raise FusionKernelException(
            f"CEI width mismatch: features have C={pair.channels}, weights C={w.channels}")
    height, width = pair.rgb.shape[2:]
    target = (min(w.pool_target[0], height), min(w.pool_target[1], width))
    pooled = resample(concat_channels([pair.rgb, pair.ir]), "adaptive_avg_pool", target)
    tokens = rearrange(pooled, "b c h w -> b (h w) c")
    drive = activate(linear(linear(tokens, w.in_proj_down), w.in_proj_up), "silu")
    delta = softplus(linear(linear(drive, w.delta_proj_down), w.delta_proj_up), DELTA_FLOOR)
    bc_seq = linear(drive, w.bc_proj)
    scanned = ss1d_scan(ScanInputs(drive, delta, w.A, bc_seq[..., :w.state_dim],
                                   bc_seq[..., w.state_dim:]))
    summary = normalize(scanned, "layer", 1, w.ln.gamma, w.ln.beta).mean(axis=1)
    gates = activate(linear(summary, w.out_proj), "sigmoid")
    return gates[:, :w.channels], gates[:, w.channels:]


def cei_forward(pair: ModalityPair, w: CEIWeights) -> ModalityPair:
    """F^_m = F_m + W_m * F_m with the channel gates broadcast over space."""
    gate_rgb, gate_ir = cei_gates(pair, w)
    return ModalityPair(
        rgb=pair.rgb + gate_rgb[:, :, None, None] * pair.rgb,
        ir=pair.ir + gate_ir[:, :, None, None] * pair.ir,
        level=pair.level,
    )
