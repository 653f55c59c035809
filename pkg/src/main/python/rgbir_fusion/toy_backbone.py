"""Toy convolution trunk standing in for the detector backbone.

One trunk is shared by both modalities; every stage output is refined by a
modality-specific adapter before it feeds the next stage.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rgbir_fusion.cei_module import ModalityPair
from rgbir_fusion.conv_blocks import downsample
from rgbir_fusion.fusion_config import PYRAMID_LEVELS, SIZE_MULTIPLE, ToyBackboneConfig
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.lfm_adapter import adapter_forward, init_adapter
from rgbir_fusion.tensor_core import ConvWeights, Tensor, activate, conv2d
from rgbir_fusion.weight_init import init_conv

MODALITIES = ("rgb", "ir")
RGB_CHANNELS = 3


@dataclass(frozen=True)
class StageWeights:
    """Two 3x3 convs followed by a stride-2 3x3 downsample"""
    conv1: ConvWeights
    conv2: ConvWeights
    down: ConvWeights


@dataclass(frozen=True)
class BackboneWeights:
    """Stride-4 stem and three stages ending at strides 8, 16 and 32"""
    stem: tuple
    stages: tuple

    @property
    def stage_channels(self) -> tuple:
        """Output width of each stage"""
        return tuple(stage.down.out_channels for stage in self.stages)


def init_backbone(rng: np.random.Generator, config: ToyBackboneConfig) -> BackboneWeights:
    """Seeded trunk weights for the widths in ``config``."""
    if len(config.stage_channels) != len(PYRAMID_LEVELS):
        raise FusionKernelException(
            f"Toy backbone needs three stage widths, got {config.stage_channels}")
    stem = (init_conv(rng, config.stem_channels, RGB_CHANNELS, 3),
            init_conv(rng, config.stem_channels, config.stem_channels, 3))
    stages = []
    width = config.stem_channels
    for channels in config.stage_channels:
        stages.append(StageWeights(conv1=init_conv(rng, channels, width, 3),
                                   conv2=init_conv(rng, channels, channels, 3),
                                   down=init_conv(rng, channels, channels, 3)))
        width = channels
    return BackboneWeights(stem=stem, stages=tuple(stages))


def init_stage_adapters(rng: np.random.Generator, config: ToyBackboneConfig,
                        zero_outputs: bool = True) -> dict:
    """One adapter per modality per stage: {"rgb": (a3, a4, a5), "ir": (...)}."""
    return {modality: tuple(init_adapter(rng, channels, config.adapter_dim, config.rho,
                                         zero_outputs)
                            for channels in config.stage_channels)
            for modality in MODALITIES}


def stem_forward(x: Tensor, stem: tuple) -> Tensor:
    """Two stride-2 convs with SiLU: H x W -> H/4 x W/4."""
    for conv in stem:
        x = activate(downsample(x, conv), "silu")
    return x


def stage_forward(x: Tensor, w: StageWeights) -> Tensor:
    """Conv-SiLU twice, then halve the extents."""
    x = activate(conv2d(x, w.conv1), "silu")
    x = activate(conv2d(x, w.conv2), "silu")
    return downsample(x, w.down)


def check_input_pair(rgb: Tensor, ir: Tensor) -> None:
    """Rejects inputs the trunk cannot stride down to three pyramid levels."""
    if rgb.ndim != 4 or rgb.shape[1] != RGB_CHANNELS:
        raise FusionKernelException(f"RGB input must be (B, 3, H, W), got {rgb.shape}")
    if ir.ndim != 4 or ir.shape[1] != 1:
        raise FusionKernelException(f"IR input must be (B, 1, H, W), got {ir.shape}")
    if rgb.shape[0] != ir.shape[0] or rgb.shape[2:] != ir.shape[2:]:
        raise FusionKernelException(f"RGB {rgb.shape} and IR {ir.shape} are not aligned")
    height, width = rgb.shape[2:]
    if height % SIZE_MULTIPLE or width % SIZE_MULTIPLE or not height or not width:
        raise FusionKernelException(
            f"Input size {height}x{width} must be a positive multiple of {SIZE_MULTIPLE}")


def backbone_forward(rgb: Tensor, ir: Tensor, w: BackboneWeights,
                     adapters: Optional[dict] = None) -> list:
    """Per-modality features at levels 3, 4 and 5 as ModalityPairs.

    The single-band IR image is replicated to three channels so both
    modalities enter the same stem.
    """
    check_input_pair(rgb, ir)
    streams = {"rgb": stem_forward(rgb, w.stem),
               "ir": stem_forward(np.repeat(ir, RGB_CHANNELS, axis=1), w.stem)}
    levels = []
    for index, (level, stage) in enumerate(zip(PYRAMID_LEVELS, w.stages)):
        for modality in MODALITIES:
            feature = stage_forward(streams[modality], stage)
            if adapters:
                feature = adapter_forward(feature, adapters[modality][index])
            streams[modality] = feature
        levels.append(ModalityPair(rgb=streams["rgb"], ir=streams["ir"], level=level))
    return levels
