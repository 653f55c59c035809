"""Encoder assembly: toy trunk, modality adapters, CEI gating and pyramid fusion"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rgbir_fusion.cei_module import CEIWeights, cei_forward, init_cei
from rgbir_fusion.fusion_config import (ADAPTER_DIM, COMPLETION_SIDES, PYRAMID_LEVELS,
                                        EncoderConfig)
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.lfm_adapter import SPATIAL_EXPERT_FIELDS, init_adapter
from rgbir_fusion.pyramid_fusion import MPFWeights, PyramidFeatures, init_mpf, mpf_forward
from rgbir_fusion.region_scan import (dense_parameter_count, dense_ss2d_parameter_count,
                                      init_region_ss2d, low_rank_parameter_count)
from rgbir_fusion.tensor_core import Tensor
from rgbir_fusion.toy_backbone import (BackboneWeights, backbone_forward, init_backbone,
                                       init_stage_adapters)
from rgbir_fusion.weight_store import (WeightStore, flatten_weights, parameter_count,
                                       restore_weights)

logger = logging.getLogger(__name__)

REPORT_ADAPTER_DIMS = (32, 64, 128, 256)
REPORT_CHANNELS = 256


@dataclass(frozen=True)
class EncoderWeights:
    """Every tensor the encoder reads, grouped by component"""
    backbone: BackboneWeights
    adapters: dict
    cei: dict
    mpf: MPFWeights


def _component_rngs(seed: int) -> list:
    # one stream per component: disabling a component leaves the others untouched
    if seed < 0:
        raise FusionKernelException(f"Seed must be non-negative, got {seed}")
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(4)]


def init_encoder_weights(config: Optional[EncoderConfig] = None,
                         seed: Optional[int] = None) -> EncoderWeights:
    """Seeded weights for every component enabled in ``config``."""
    config = config or EncoderConfig()
    seed = config.backbone.seed if seed is None else seed
    backbone_rng, adapter_rng, cei_rng, mpf_rng = _component_rngs(seed)
    channels = tuple(config.backbone.stage_channels)
    adapters = init_stage_adapters(adapter_rng, config.backbone) if config.use_adapters else {}
    cei = {}
    if config.use_cei and config.shared_cei:
        if len(set(channels)) != 1:
            raise FusionKernelException(
                f"A shared CEI needs equal widths at every level, got {channels}")
        cei = {"shared": init_cei(cei_rng, channels[0], config.rank, config.state_dim,
                                  config.pool_target)}
    elif config.use_cei:
        cei = {f"p{level}": init_cei(cei_rng, width, config.rank, config.state_dim,
                                     config.pool_target)
               for level, width in zip(PYRAMID_LEVELS, channels)}
    return EncoderWeights(
        backbone=init_backbone(backbone_rng, config.backbone),
        adapters=adapters,
        cei=cei,
        mpf=init_mpf(mpf_rng, channels, config.hidden_dim, config.completion_side,
                     config.rank, config.state_dim, config.scan_directions),
    )


def _cei_for(weights: EncoderWeights, level: int) -> CEIWeights:
    return weights.cei["shared"] if "shared" in weights.cei else weights.cei[f"p{level}"]


def encode(rgb: Tensor, ir: Tensor, weights: EncoderWeights,
           config: Optional[EncoderConfig] = None) -> PyramidFeatures:
    """Runs the encoder on already-built weights objects."""
    config = config or EncoderConfig()
    levels = backbone_forward(rgb, ir, weights.backbone,
                              weights.adapters if config.use_adapters else None)
    if config.use_cei:
        levels = [cei_forward(pair, _cei_for(weights, pair.level)) for pair in levels]
    return mpf_forward(levels, weights.mpf)


def weight_names(config: Optional[EncoderConfig] = None) -> list:
    """Names (in storage order) that a WeightStore must hold for ``config``."""
    return list(flatten_weights(init_encoder_weights(config)))


def encoder_forward(rgb: Tensor, ir: Tensor, weights: WeightStore,
                    config: Optional[EncoderConfig] = None) -> PyramidFeatures:
    """RGB (B, 3, H, W) and IR (B, 1, H, W) -> {P3, N4, N5}, weights read by name."""
    config = config or EncoderConfig()
    template = init_encoder_weights(config)
    expected = flatten_weights(template)
    missing = weights.missing(expected)
    if missing:
        raise FusionKernelException(f"Missing weights: {', '.join(missing)}")
    unexpected = [name for name in weights.names if name not in expected]
    if unexpected:
        logger.warning("Ignoring %d weights the encoder does not use", len(unexpected))
        logger.debug("Unused weights: %s", unexpected)
    restored = restore_weights(template, weights)
    logger.debug("Encoder restored %d tensors", len(expected))
    return encode(rgb, ir, restored, config)


def level_statistics(features: PyramidFeatures) -> dict:
    """Per-level mean, std, min, max and finite count of the fused outputs."""
    stats = {}
    for name, tensor in features.as_dict().items():
        stats[name] = {
            "shape": list(tensor.shape),
            "mean": float(tensor.mean()),
            "std": float(tensor.std()),
            "min": float(tensor.min()),
            "max": float(tensor.max()),
            "finite_count": int(np.isfinite(tensor).sum()),
        }
    return stats


def adapter_parameter_count(channels: int, adapter_dim: int = ADAPTER_DIM,
                            spatial_only: bool = False) -> int:
    """Parameters of one adapter; ``spatial_only`` keeps just the spatial expert."""
    adapter = init_adapter(np.random.default_rng(0), channels, adapter_dim)
    if spatial_only:
        return parameter_count([getattr(adapter, name) for name in SPATIAL_EXPERT_FIELDS])
    return parameter_count(adapter)


def parameter_report(config: Optional[EncoderConfig] = None,
                     channels: int = REPORT_CHANNELS) -> list:
    """(component, variant, parameter count) rows for the ablation variants."""
    config = config or EncoderConfig()
    rows = []
    for side in COMPLETION_SIDES:
        variant = dataclasses.replace(config, completion_side=side)
        rows.append(("encoder", f"completion={side}",
                     parameter_count(init_encoder_weights(variant))))
    for adapter_dim in REPORT_ADAPTER_DIMS:
        rows.append(("adapter", f"dim={adapter_dim}",
                     adapter_parameter_count(channels, adapter_dim)))
    rows.append(("adapter", f"spatial_only dim={config.backbone.adapter_dim}",
                 adapter_parameter_count(channels, config.backbone.adapter_dim, True)))
    region = init_region_ss2d(np.random.default_rng(0), channels, config.rank,
                              config.state_dim, config.scan_directions)
    rows.append(("drive_projection", "low_rank", low_rank_parameter_count(channels, config.rank)))
    rows.append(("drive_projection", "dense", dense_parameter_count(channels)))
    rows.append(("ss2d", "region_aware", parameter_count(region)))
    rows.append(("ss2d", "dense_reference",
                 dense_ss2d_parameter_count(channels, config.state_dim)))
    return rows
