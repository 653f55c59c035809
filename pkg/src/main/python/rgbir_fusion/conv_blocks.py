"""Convolution blocks shared by the toy backbone and the pyramid fusion"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rgbir_fusion.tensor_core import ConvWeights, Tensor, activate, concat_channels, conv2d
from rgbir_fusion.weight_init import init_conv


def downsample(x: Tensor, w: ConvWeights) -> Tensor:
    """Stride-2 convolution: the same-padded response sampled at even positions."""
    return np.ascontiguousarray(conv2d(x, w)[:, :, ::2, ::2])


@dataclass(frozen=True)
class FusionBlockWeights:
    """1x1 reduction over concatenated inputs followed by one residual 3x3 block."""
    proj: ConvWeights
    conv: ConvWeights


def init_fusion_block(rng: np.random.Generator, in_channels: int,
                      out_channels: int) -> FusionBlockWeights:
    """Seeded fusion block mapping in_channels to out_channels."""
    return FusionBlockWeights(proj=init_conv(rng, out_channels, in_channels),
                              conv=init_conv(rng, out_channels, out_channels, 3))


def fusion_block(inputs: Sequence[Tensor], w: FusionBlockWeights) -> Tensor:
    """y = Conv1x1(Cat[inputs]); y + SiLU(Conv3x3(y))."""
    reduced = conv2d(concat_channels(inputs), w.proj)
    return reduced + activate(conv2d(reduced, w.conv), "silu")
