"""Dense float64 tensor primitives shared by every fusion module.

Tensors are plain numpy arrays in batch/channel/height/width layout. Every
operation returns a fresh array, leaves its inputs untouched and rejects
non-finite results.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from rgbir_fusion.fusion_config import NORM_EPS
from rgbir_fusion.fusion_kernel_exception import FusionKernelException

Tensor = npt.NDArray[np.float64]


def as_tensor(data, shape: Optional[Sequence[int]] = None) -> Tensor:
    """Builds a contiguous float64 tensor of rank 1 to 4 from any array-like."""
    array = np.array(data, dtype=np.float64)
    if shape is not None:
        array = array.reshape(tuple(shape))
    if not 1 <= array.ndim <= 4:
        raise FusionKernelException(f"Tensor rank must be 1..4, got shape {array.shape}")
    return ensure_finite(np.ascontiguousarray(array), "as_tensor")


def ensure_finite(x: Tensor, where: str) -> Tensor:
    """Rejects NaN/Inf values produced or received by an operation."""
    if not np.all(np.isfinite(x)):
        raise FusionKernelException(f"Non-finite values in {where}", operation=where)
    return x


@dataclass(frozen=True)
class ConvWeights:
    """Kernel (C_out, C_in/groups, k, k), optional bias (C_out) and group count."""
    kernel: Tensor
    bias: Optional[Tensor] = None
    groups: int = 1
    padding: Optional[int] = None

    def __post_init__(self):
        if self.kernel.ndim != 4 or self.kernel.shape[2] != self.kernel.shape[3]:
            raise FusionKernelException(
                f"Conv kernel must be (C_out, C_in/groups, k, k), got {self.kernel.shape}")
        if self.groups < 1 or self.kernel.shape[0] % self.groups:
            raise FusionKernelException(
                f"groups={self.groups} does not divide C_out={self.kernel.shape[0]}")
        if self.bias is not None and self.bias.shape != (self.kernel.shape[0],):
            raise FusionKernelException(
                f"Conv bias shape {self.bias.shape} does not match C_out={self.kernel.shape[0]}")

    @property
    def in_channels(self) -> int:
        """C_in expected by the kernel"""
        return self.kernel.shape[1] * self.groups

    @property
    def out_channels(self) -> int:
        """C_out produced by the kernel"""
        return self.kernel.shape[0]

    @property
    def kernel_size(self) -> int:
        """Spatial size k of the square kernel"""
        return self.kernel.shape[2]

    @property
    def pad(self) -> int:
        """Zero padding on every side; same-padding k/2 unless overridden"""
        return self.kernel_size // 2 if self.padding is None else self.padding


@dataclass(frozen=True)
class NormWeights:
    """Affine parameters of a layer or group normalization"""
    gamma: Tensor
    beta: Tensor


@dataclass(frozen=True)
class LinearWeights:
    """Dense map on the last axis of a token sequence: weight (out, in), bias (out)"""
    weight: Tensor
    bias: Optional[Tensor] = None


def conv2d(x: Tensor, w: ConvWeights) -> Tensor:
    """Stride-1 zero-padded grouped convolution keeping the spatial extents."""
    if x.ndim != 4 or x.shape[1] != w.in_channels:
        raise FusionKernelException(
            f"conv2d shape mismatch: input {x.shape} vs kernel {w.kernel.shape} "
            f"(groups={w.groups})")
    batch, _, height, width = x.shape
    size, pad, groups = w.kernel_size, w.pad, w.groups
    if height + 2 * pad - size + 1 != height or width + 2 * pad - size + 1 != width:
        raise FusionKernelException(
            f"conv2d padding {pad} does not preserve extents for kernel {w.kernel.shape}")
    if size == 1 and groups == 1:
        out = np.einsum("bchw,oc->bohw", x, w.kernel[:, :, 0, 0], optimize=True)
    elif groups == x.shape[1] == w.out_channels:
        # depthwise: shift-and-accumulate, one tap at a time
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        out = np.zeros_like(x)
        for row in range(size):
            for col in range(size):
                tap = w.kernel[:, 0, row, col][None, :, None, None]
                out += tap * padded[:, :, row:row + height, col:col + width]
    else:
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        windows = sliding_window_view(padded, (size, size), axis=(2, 3))
        windows = windows.reshape(batch, groups, -1, height, width, size, size)
        kernel = w.kernel.reshape(groups, -1, w.kernel.shape[1], size, size)
        out = np.einsum("bgihwpq,goipq->bgohw", windows, kernel, optimize=True)
        out = out.reshape(batch, w.out_channels, height, width)
    if w.bias is not None:
        out = out + w.bias[None, :, None, None]
    return ensure_finite(np.ascontiguousarray(out), "conv2d")


def normalize(x: Tensor, kind: str, num_groups: int, gamma: Tensor, beta: Tensor,
              eps: float = NORM_EPS) -> Tensor:
    """Layer or group normalization followed by a per-channel affine map.

    ``layer`` normalizes the channel axis of a BCHW map at every position, or
    the last axis of a (..., features) token sequence. ``group`` normalizes
    each of ``num_groups`` channel groups over (C/G, H, W).
    """
    if eps <= 0:
        raise FusionKernelException(f"normalize eps must be positive, got {eps}")
    if kind == "layer":
        axis = 1 if x.ndim == 4 else x.ndim - 1
        mean = x.mean(axis=axis, keepdims=True)
        var = x.var(axis=axis, keepdims=True)
        normed = (x - mean) / np.sqrt(var + eps)
    elif kind == "group":
        if x.ndim != 4:
            raise FusionKernelException(f"group normalization expects BCHW, got {x.shape}")
        channels = x.shape[1]
        if num_groups < 1 or channels % num_groups:
            raise FusionKernelException(
                f"num_groups={num_groups} does not divide C={channels}")
        grouped = x.reshape(x.shape[0], num_groups, -1, *x.shape[2:])
        mean = grouped.mean(axis=(2, 3, 4), keepdims=True)
        var = grouped.var(axis=(2, 3, 4), keepdims=True)
        normed = ((grouped - mean) / np.sqrt(var + eps)).reshape(x.shape)
        axis = 1
    else:
        raise FusionKernelException(f"Unknown normalization kind: {kind}")
    shape = [1] * x.ndim
    shape[axis] = -1
    out = normed * gamma.reshape(shape) + beta.reshape(shape)
    return ensure_finite(out, "normalize")


def _sigmoid(x: Tensor) -> Tensor:
    decay = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))


def activate(x: Tensor, kind: str) -> Tensor:
    """SiLU, sigmoid, or softmax over the channel axis (axis 1)."""
    if kind == "sigmoid":
        out = _sigmoid(x)
    elif kind == "silu":
        out = x * _sigmoid(x)
    elif kind == "softmax_over_channels":
        shifted = np.exp(x - x.max(axis=1, keepdims=True))
        out = shifted / shifted.sum(axis=1, keepdims=True)
    else:
        raise FusionKernelException(f"Unknown activation kind: {kind}")
    return ensure_finite(out, "activate")


def softplus(x: Tensor, floor: float = 0.0) -> Tensor:
    """log(1 + e^x), clamped from below at ``floor``."""
    return ensure_finite(np.maximum(np.logaddexp(0.0, x), floor), "softplus")


def _window_bounds(extent: int, cells: int) -> list:
    return [((i * extent) // cells, -((-(i + 1) * extent) // cells)) for i in range(cells)]


def resample(x: Tensor, kind: str, size: Optional[Sequence[int]] = None) -> Tensor:
    """Adaptive/global average pooling or nearest-neighbour 2x upsampling of BCHW maps."""
    if x.ndim != 4:
        raise FusionKernelException(f"resample expects BCHW, got {x.shape}")
    height, width = x.shape[2:]
    if kind == "global_avg_pool":
        return resample(x, "adaptive_avg_pool", (1, 1))
    if kind == "upsample_nearest_2x":
        return ensure_finite(np.repeat(np.repeat(x, 2, axis=2), 2, axis=3), "resample")
    if kind != "adaptive_avg_pool":
        raise FusionKernelException(f"Unknown resample kind: {kind}")
    if size is None or len(size) != 2:
        raise FusionKernelException("adaptive_avg_pool needs a (h, w) target")
    out_h, out_w = size
    if not (1 <= out_h <= height and 1 <= out_w <= width):
        raise FusionKernelException(
            f"Invalid pooling target {tuple(size)} for input extents {(height, width)}")
    out = np.empty(x.shape[:2] + (out_h, out_w))
    for i, (top, bottom) in enumerate(_window_bounds(height, out_h)):
        for j, (left, right) in enumerate(_window_bounds(width, out_w)):
            out[:, :, i, j] = x[:, :, top:bottom, left:right].mean(axis=(2, 3))
    return ensure_finite(out, "resample")


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    """Stacks BCHW maps along the channel axis in argument order."""
    if not xs:
        raise FusionKernelException("concat_channels needs at least one tensor")
    reference = xs[0].shape
    for item in xs:
        if item.ndim != 4 or (item.shape[0],) + item.shape[2:] != (reference[0],) + reference[2:]:
            raise FusionKernelException(
                f"concat_channels shape mismatch: {reference} vs {item.shape}")
    return np.concatenate(xs, axis=1)


def linear(x: Tensor, w: LinearWeights) -> Tensor:
    """Applies a dense map to the last axis of a token sequence."""
    if x.shape[-1] != w.weight.shape[1]:
        raise FusionKernelException(
            f"linear shape mismatch: input {x.shape} vs weight {w.weight.shape}")
    out = x @ w.weight.T
    if w.bias is not None:
        out = out + w.bias
    return ensure_finite(out, "linear")
