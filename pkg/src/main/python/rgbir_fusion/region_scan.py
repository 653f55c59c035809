"""Region-aware SS2D: group-normalized local context, low-rank scan parameters,
two-group B/C generation and horizontal/vertical selective scans."""
import math
from dataclasses import dataclass

import numpy as np
from einops import rearrange

from rgbir_fusion.fusion_config import (CHANNEL_GROUPS, DELTA_FLOOR, LOW_RANK,
                                        SCAN_DIRECTIONS, STATE_DIM)
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.selective_scan import DirectionParams, ss2d, unfold_direction
from rgbir_fusion.tensor_core import (ConvWeights, NormWeights, Tensor, activate,
                                      conv2d, ensure_finite, normalize, softplus)
from rgbir_fusion.weight_init import (init_conv, init_delta_bias, init_depthwise,
                                      init_norm, init_state_matrix)


@dataclass(frozen=True)
class RegionSS2DWeights:
    """Weights of one region-aware SS2D block operating at width C."""
    gn: NormWeights
    dw3: ConvWeights
    u_proj_down: ConvWeights
    u_proj_up: ConvWeights
    delta_proj_down: ConvWeights
    delta_proj_up: ConvWeights
    gate_proj_down: ConvWeights
    gate_proj_up: ConvWeights
    bc_group_down: ConvWeights
    bc_group_up: ConvWeights
    A_dir: dict
    out_proj: ConvWeights
    rank: int = LOW_RANK
    groups: int = CHANNEL_GROUPS
    state_dim: int = STATE_DIM

    @property
    def channels(self) -> int:
        """Model width C"""
        return self.gn.gamma.shape[0]

    @property
    def directions(self) -> tuple:
        """Scan directions, in the order they are summed"""
        return tuple(self.A_dir)


def init_region_ss2d(rng: np.random.Generator, channels: int, rank: int = LOW_RANK,
                     state_dim: int = STATE_DIM, directions: tuple = SCAN_DIRECTIONS,
                     groups: int = CHANNEL_GROUPS) -> RegionSS2DWeights:
    """Seeded region-aware SS2D weights; C must split evenly into the channel groups."""
    if channels % groups:
        raise FusionKernelException(
            f"Region-aware SS2D needs C divisible by {groups} groups, got C={channels}")
    delta_up = init_conv(rng, channels, rank)
    return RegionSS2DWeights(
        gn=init_norm(channels),
        dw3=init_depthwise(rng, channels, 3),
        u_proj_down=init_conv(rng, rank, channels, bias=False),
        u_proj_up=init_conv(rng, channels, rank, bias=False),
        delta_proj_down=init_conv(rng, rank, channels, bias=False),
        delta_proj_up=ConvWeights(delta_up.kernel, init_delta_bias(rng, channels)),
        gate_proj_down=init_conv(rng, rank, channels, bias=False),
        gate_proj_up=init_conv(rng, channels, rank, bias=False),
        bc_group_down=init_conv(rng, groups * rank, channels, groups=groups, bias=False),
        bc_group_up=init_conv(rng, groups * 2 * state_dim, groups * rank, groups=groups,
                              bias=False),
        A_dir={direction: init_state_matrix(channels, state_dim) for direction in directions},
        out_proj=init_conv(rng, channels, channels),
        rank=rank, groups=groups, state_dim=state_dim,
    )


def _low_rank(x: Tensor, down: ConvWeights, up: ConvWeights) -> Tensor:
    return conv2d(conv2d(x, down), up)


def region_aware_ss2d(x: Tensor, w: RegionSS2DWeights) -> Tensor:
    """
    x~ = SiLU(DWConv(GN(x))); driving signal, step sizes and gate come from
    low-rank pairs on x~, B/C from the grouped bottleneck; the directional scans
    are summed, gated by SiLU(gate) and projected back to C channels.
    """
    if x.ndim != 4 or x.shape[1] % w.groups:
        raise FusionKernelException(
            f"Region-aware SS2D needs C divisible by {w.groups}, got input {x.shape}")
    if x.shape[1] != w.channels:
        raise FusionKernelException(
            f"Region-aware SS2D width mismatch: input {x.shape} vs weights C={w.channels}")
    batch, _, height, width = x.shape
    local = activate(conv2d(normalize(x, "group", w.groups, w.gn.gamma, w.gn.beta), w.dw3),
                     "silu")
    drive = _low_rank(local, w.u_proj_down, w.u_proj_up)
    delta = softplus(_low_rank(local, w.delta_proj_down, w.delta_proj_up), DELTA_FLOOR)
    bc_maps = rearrange(_low_rank(local, w.bc_group_down, w.bc_group_up),
                        "b (g two n) h w -> two b (g n) h w", g=w.groups, two=2)
    params = {}
    for direction, a_matrix in w.A_dir.items():
        b_seq, c_seq = (unfold_direction(bc_map, direction).reshape(
            batch, height * width, w.groups, w.state_dim) for bc_map in bc_maps)
        params[direction] = DirectionParams(unfold_direction(delta, direction), a_matrix,
                                            b_seq, c_seq)
    scanned = ss2d(drive, params)
    gated = scanned * activate(_low_rank(local, w.gate_proj_down, w.gate_proj_up), "silu")
    return ensure_finite(conv2d(gated, w.out_proj), "region_aware_ss2d")


def low_rank_parameter_count(channels: int, rank: int = LOW_RANK) -> int:
    """Bias-free C -> r -> C projection pair."""
    return channels * rank + rank * channels


def dense_parameter_count(channels: int) -> int:
    """Bias-free dense C x C projection."""
    return channels * channels


def dense_ss2d_parameter_count(channels: int, state_dim: int = STATE_DIM, expand: int = 2,
                               directions: int = 4, conv: int = 3) -> int:
    """Parameters of a standard dense-projection SS2D block at model width C."""
    inner = expand * channels
    dt_rank = math.ceil(channels / 16)
    in_proj = channels * 2 * inner
    depthwise = inner * conv * conv + inner
    x_proj = directions * inner * (dt_rank + 2 * state_dim)
    dt_proj = directions * (dt_rank * inner + inner)
    state = directions * inner * state_dim + directions * inner
    out_norm = 2 * inner
    out_proj = inner * channels
    return in_proj + depthwise + x_proj + dt_proj + state + out_norm + out_proj
