"""Modality-completion pyramid fusion over the three CEI-enhanced levels.

Levels are fused by 1x1 projections, the deepest one is refined by a single
self-attention block, and the top-down and bottom-up paths each receive a
gated region-aware scan residual ("completion") from the IR stream.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from einops import rearrange

from rgbir_fusion.cei_module import ModalityPair
from rgbir_fusion.conv_blocks import downsample, fusion_block, init_fusion_block
from rgbir_fusion.fusion_config import (COMPLETION_SIDES, DEFAULT_COMPLETION_SIDE, LOW_RANK,
                                        PYRAMID_LEVELS, SCAN_DIRECTIONS, STATE_DIM)
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.region_scan import RegionSS2DWeights, init_region_ss2d, region_aware_ss2d
from rgbir_fusion.tensor_core import (ConvWeights, LinearWeights, NormWeights, Tensor,
                                      activate, concat_channels, conv2d, ensure_finite,
                                      linear, normalize, resample)
from rgbir_fusion.weight_init import init_conv, init_depthwise, init_linear, init_norm

TOP_DOWN = ("td4", "td3")
BOTTOM_UP = ("bu4", "bu5")
JUNCTIONS = TOP_DOWN + BOTTOM_UP
POSITION_TEMPERATURE = 10000.0


@dataclass(frozen=True)
class PyramidFeatures:
    """Fused outputs at strides 8, 16 and 32, all at hidden width d."""
    p3: Tensor
    n4: Tensor
    n5: Tensor

    def __post_init__(self):
        shapes = [self.p3.shape, self.n4.shape, self.n5.shape]
        for upper, lower in zip(shapes, shapes[1:]):
            if upper[:2] != lower[:2] or (upper[2] // 2, upper[3] // 2) != lower[2:]:
                raise FusionKernelException(f"Pyramid shape law violated: {shapes}")

    def as_dict(self) -> dict:
        """Level name -> tensor, finest first."""
        return {"p3": self.p3, "n4": self.n4, "n5": self.n5}


@dataclass(frozen=True)
class AttentionWeights:
    """Single-head self-attention with post-norm residuals and a two-layer feed-forward."""
    q_proj: LinearWeights
    k_proj: LinearWeights
    v_proj: LinearWeights
    o_proj: LinearWeights
    ln1: NormWeights
    ffn_in: LinearWeights
    ffn_out: LinearWeights
    ln2: NormWeights
    pos_scale: float = 1.0


@dataclass(frozen=True)
class CompletionWeights:
    """Width alignment, region-aware scan and depthwise output conv of one branch."""
    rss2d: RegionSS2DWeights
    dw: ConvWeights
    align: Optional[ConvWeights] = None


@dataclass(frozen=True)
class MPFWeights:
    """Per-level projections, deep attention, completion branches and fusion blocks."""
    fuse_proj: dict
    attn: AttentionWeights
    completion: dict
    fusion: dict
    downsample: dict
    completion_side: str = DEFAULT_COMPLETION_SIDE


def init_attention(rng: np.random.Generator, width: int, ffn_ratio: int = 4,
                   zero_residuals: bool = False) -> AttentionWeights:
    """Seeded attention block; ``zero_residuals`` zeroes the value, output and FFN-out maps."""
    return AttentionWeights(
        q_proj=init_linear(rng, width, width),
        k_proj=init_linear(rng, width, width),
        v_proj=init_linear(rng, width, width, zero=zero_residuals),
        o_proj=init_linear(rng, width, width, zero=zero_residuals),
        ln1=init_norm(width),
        ffn_in=init_linear(rng, ffn_ratio * width, width),
        ffn_out=init_linear(rng, width, ffn_ratio * width, zero=zero_residuals),
        ln2=init_norm(width),
    )


def init_completion(rng: np.random.Generator, in_channels: int, width: int,
                    rank: int = LOW_RANK, state_dim: int = STATE_DIM,
                    directions: tuple = SCAN_DIRECTIONS, zero_output: bool = False
                    ) -> CompletionWeights:
    """Seeded completion branch taking in_channels features to the hidden width."""
    return CompletionWeights(
        rss2d=init_region_ss2d(rng, width, rank, state_dim, directions),
        dw=init_depthwise(rng, width, 3, zero=zero_output),
        align=None if in_channels == width else init_conv(rng, width, in_channels),
    )


def _completion_sides(side: str) -> tuple:
    if side not in COMPLETION_SIDES:
        raise FusionKernelException(f"Unknown completion side: {side}")
    return {"none": (), "ir": ("ir",), "rgb": ("rgb",), "both": ("ir", "rgb")}[side]


def init_mpf(rng: np.random.Generator, level_channels: Sequence[int], width: int,
             side: str = DEFAULT_COMPLETION_SIDE, rank: int = LOW_RANK,
             state_dim: int = STATE_DIM, directions: tuple = SCAN_DIRECTIONS,
             zero_completion: bool = False) -> MPFWeights:
    """Seeded MPF weights for per-modality level widths (C3, C4, C5) and hidden width d."""
    if len(level_channels) != len(PYRAMID_LEVELS):
        raise FusionKernelException(f"MPF needs three level widths, got {level_channels}")
    channels = dict(zip(PYRAMID_LEVELS, level_channels))
    junction_level = {"td4": 4, "td3": 3, "bu4": 4, "bu5": 5}
    sides = _completion_sides(side)
    return MPFWeights(
        fuse_proj={f"p{level}": init_conv(rng, width, 2 * channels[level])
                   for level in PYRAMID_LEVELS},
        attn=init_attention(rng, width),
        completion={junction: {branch: init_completion(rng, channels[junction_level[junction]],
                                                        width, rank, state_dim, directions,
                                                        zero_completion)
                               for branch in sides}
                    for junction in JUNCTIONS},
        fusion={junction: init_fusion_block(rng, 3 * width, width) for junction in JUNCTIONS},
        downsample={junction: init_conv(rng, width, width, 3) for junction in BOTTOM_UP},
        completion_side=side,
    )


def fuse_project(pair: ModalityPair, w: ConvWeights) -> Tensor:
    """F^_fuse = Proj(Cat[F^_rgb, F^_ir])."""
    return conv2d(concat_channels([pair.rgb, pair.ir]), w)


def sinusoidal_position_2d(height: int, width: int, channels: int) -> Tensor:
    """Fixed 2D sine-cosine encoding, one row of ``channels`` values per row-major position."""
    if channels % 4:
        raise FusionKernelException(
            f"Positional encoding width must be divisible by 4, got {channels}")
    quarter = channels // 4
    omega = 1.0 / POSITION_TEMPERATURE ** (np.arange(quarter) / quarter)
    grid_h, grid_w = np.meshgrid(np.arange(height, dtype=np.float64),
                                 np.arange(width, dtype=np.float64), indexing="ij")
    out_w = grid_w.reshape(-1, 1) * omega[None]
    out_h = grid_h.reshape(-1, 1) * omega[None]
    return np.concatenate([np.sin(out_w), np.cos(out_w), np.sin(out_h), np.cos(out_h)], axis=1)


def attention_weights(queries: Tensor, keys: Tensor) -> Tensor:
    """Scaled dot-product weights laid out (B, L_key, L_query); each query column sums to 1."""
    scores = np.einsum("bkd,bqd->bkq", keys, queries) / np.sqrt(queries.shape[-1])
    return activate(scores, "softmax_over_channels")


def attention_block(tokens: Tensor, w: AttentionWeights,
                    position: Optional[Tensor] = None) -> Tensor:
    """Post-norm self-attention + feed-forward on (B, L, d) tokens."""
    query_in = tokens if position is None else tokens + position[None]
    weights = attention_weights(linear(query_in, w.q_proj), linear(query_in, w.k_proj))
    attended = np.einsum("bkq,bkd->bqd", weights, linear(tokens, w.v_proj))
    hidden = normalize(tokens + linear(attended, w.o_proj), "layer", 1, w.ln1.gamma, w.ln1.beta)
    expanded = activate(linear(hidden, w.ffn_in), "silu")
    return normalize(hidden + linear(expanded, w.ffn_out), "layer", 1, w.ln2.gamma, w.ln2.beta)


def deep_attention(f5: Tensor, w: AttentionWeights, use_position: bool = True) -> Tensor:
    """Self-attention over the flattened deepest level, shape preserved."""
    _, channels, height, width = f5.shape
    position = None
    if use_position and w.pos_scale:
        position = w.pos_scale * sinusoidal_position_2d(height, width, channels)
    tokens = rearrange(f5, "b c h w -> b (h w) c")
    refined = attention_block(tokens, w, position)
    return np.ascontiguousarray(rearrange(refined, "b (h w) c -> b c h w", h=height, w=width))


def completion_gate(fuse_feat: Tensor) -> Tensor:
    """sigma(GAP(F^_fuse)), one scalar in (0, 1) per (batch, channel)."""
    return activate(resample(fuse_feat, "global_avg_pool"), "sigmoid")


def completion_branch(ir_feat: Tensor, fuse_feat: Tensor, w: CompletionWeights) -> Tensor:
    """R = sigma(GAP(fuse)) * DWConv(R-SS2D(ir)), the gate broadcast over space."""
    if ir_feat.shape[0] != fuse_feat.shape[0] or ir_feat.shape[2:] != fuse_feat.shape[2:]:
        raise FusionKernelException(
            f"Completion inputs not aligned: ir {ir_feat.shape} vs fused {fuse_feat.shape}")
    aligned = ir_feat if w.align is None else conv2d(ir_feat, w.align)
    scanned = region_aware_ss2d(aligned, w.rss2d)
    return ensure_finite(completion_gate(fuse_feat) * conv2d(scanned, w.dw), "completion_branch")


def _completion(branches: dict, pair: ModalityPair, gate_feat: Tensor) -> Tensor:
    residual = np.zeros_like(gate_feat)
    for side, branch in branches.items():
        residual = residual + completion_branch(getattr(pair, side), gate_feat, branch)
    return residual


def _check_levels(levels: Sequence[ModalityPair]) -> None:
    if len(levels) != len(PYRAMID_LEVELS):
        raise FusionKernelException(f"MPF expects 3 pyramid levels, got {len(levels)}")
    if tuple(pair.level for pair in levels) != PYRAMID_LEVELS:
        raise FusionKernelException(
            f"MPF levels must be ordered {PYRAMID_LEVELS}, got {[p.level for p in levels]}")
    for upper, lower in zip(levels, levels[1:]):
        if (upper.rgb.shape[2] // 2, upper.rgb.shape[3] // 2) != lower.rgb.shape[2:]:
            raise FusionKernelException(
                f"MPF level extents must halve: {upper.rgb.shape} -> {lower.rgb.shape}")


def mpf_forward(levels: Sequence[ModalityPair], w: MPFWeights) -> PyramidFeatures:
    """Top-down then bottom-up fusion with completion residuals at every junction."""
    _check_levels(levels)
    pairs = dict(zip(PYRAMID_LEVELS, levels))
    fused = {level: fuse_project(pairs[level], w.fuse_proj[f"p{level}"])
             for level in PYRAMID_LEVELS}
    top = deep_attention(fused[5], w.attn)

    p4 = fusion_block([resample(top, "upsample_nearest_2x"), fused[4],
                       _completion(w.completion.get("td4", {}), pairs[4], fused[4])],
                      w.fusion["td4"])
    p3 = fusion_block([resample(p4, "upsample_nearest_2x"), fused[3],
                       _completion(w.completion.get("td3", {}), pairs[3], fused[3])],
                      w.fusion["td3"])
    n4 = fusion_block([downsample(p3, w.downsample["bu4"]), p4,
                       _completion(w.completion.get("bu4", {}), pairs[4], p4)],
                      w.fusion["bu4"])
    n5 = fusion_block([downsample(n4, w.downsample["bu5"]), top,
                       _completion(w.completion.get("bu5", {}), pairs[5], top)],
                      w.fusion["bu5"])
    return PyramidFeatures(p3=p3, n4=n4, n5=n5)
