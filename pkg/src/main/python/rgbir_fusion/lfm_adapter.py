"""Lightweight frequency-aware modality adapter.

A multi-kernel spatial expert and two frequency-band experts, mixed per pixel
by a softmax router and added back to the input residually.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rgbir_fusion.fusion_config import ADAPTER_DIM, DEFAULT_RHO, ROUTER_EXPERTS
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.tensor_core import (ConvWeights, NormWeights, Tensor, activate, conv2d,
                                      ensure_finite, normalize, resample)
from rgbir_fusion.weight_init import init_conv, init_depthwise, init_norm

IMAG_RESIDUE_TOLERANCE = 1e-9
SPATIAL_EXPERT_FIELDS = ("ln", "down_proj", "dw3", "dw5", "dw7", "mix_proj", "spatial_out")


@dataclass(frozen=True)
class AdapterWeights:
    """Weights of one adapter instance (one modality at one backbone stage)."""
    ln: NormWeights
    down_proj: ConvWeights
    dw3: ConvWeights
    dw5: ConvWeights
    dw7: ConvWeights
    mix_proj: ConvWeights
    spatial_out: ConvWeights
    freq_dw_low: ConvWeights
    freq_dw_high: ConvWeights
    ca_low: ConvWeights
    ca_high: ConvWeights
    freq_out_low: ConvWeights
    freq_out_high: ConvWeights
    router: ConvWeights
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise FusionKernelException(f"Adapter cutoff ratio must lie in (0, 1), got {self.rho}")
        if self.router.out_channels != ROUTER_EXPERTS:
            raise FusionKernelException(
                f"Router must emit {ROUTER_EXPERTS} channels, got {self.router.out_channels}")

    @property
    def adapter_dim(self) -> int:
        """Bottleneck width d_a"""
        return self.down_proj.out_channels


@dataclass(frozen=True)
class SpectrumPair:
    """Centred spectrum split by the low-frequency mask: low + high = full."""
    low: np.ndarray
    high: np.ndarray
    mask: np.ndarray

    @property
    def full(self) -> np.ndarray:
        """Recombined centred spectrum"""
        return self.low + self.high


def init_adapter(rng: np.random.Generator, channels: int, adapter_dim: int = ADAPTER_DIM,
                 rho: float = DEFAULT_RHO, zero_outputs: bool = True) -> AdapterWeights:
    """Seeded adapter; expert output projections start at zero so the adapter is an identity."""
    return AdapterWeights(
        ln=init_norm(channels),
        down_proj=init_conv(rng, adapter_dim, channels),
        dw3=init_depthwise(rng, adapter_dim, 3),
        dw5=init_depthwise(rng, adapter_dim, 5),
        dw7=init_depthwise(rng, adapter_dim, 7),
        mix_proj=init_conv(rng, adapter_dim, adapter_dim),
        spatial_out=init_conv(rng, channels, adapter_dim, zero=zero_outputs),
        freq_dw_low=init_depthwise(rng, adapter_dim, 3),
        freq_dw_high=init_depthwise(rng, adapter_dim, 3),
        ca_low=init_conv(rng, adapter_dim, adapter_dim),
        ca_high=init_conv(rng, adapter_dim, adapter_dim),
        freq_out_low=init_conv(rng, channels, adapter_dim, zero=zero_outputs),
        freq_out_high=init_conv(rng, channels, adapter_dim, zero=zero_outputs),
        router=init_conv(rng, ROUTER_EXPERTS, channels),
        rho=rho,
    )


def project_in(x: Tensor, w: AdapterWeights) -> Tensor:
    """X~ = Conv1x1(LN(X)), LN taken over channels at every position."""
    return conv2d(normalize(x, "layer", 1, w.ln.gamma, w.ln.beta), w.down_proj)


def spatial_expert(x_tilde: Tensor, w: AdapterWeights) -> Tensor:
    """Averaged 3/5/7 depthwise responses, identity and 1x1 mixing, projected to C."""
    averaged = (conv2d(x_tilde, w.dw3) + conv2d(x_tilde, w.dw5) + conv2d(x_tilde, w.dw7)) / 3.0
    return conv2d(averaged + x_tilde + conv2d(averaged, w.mix_proj), w.spatial_out)


def low_frequency_mask(height: int, width: int, rho: float) -> np.ndarray:
    """M(u, v) = 1 iff max(|u - H/2|, |v - W/2|) <= rho * H / 2 on the centred grid."""
    rows = np.abs(np.arange(height) - height / 2.0)[:, None]
    cols = np.abs(np.arange(width) - width / 2.0)[None, :]
    return (np.maximum(rows, cols) <= rho * height / 2.0).astype(np.float64)


def centred_spectrum(x: Tensor) -> np.ndarray:
    """Unnormalized 2D DFT over (H, W), zero frequency shifted to (H/2, W/2)."""
    return np.fft.fftshift(np.fft.fft2(x, axes=(-2, -1)), axes=(-2, -1))


def inverse_centred_spectrum(spectrum: np.ndarray) -> Tensor:
    """1/(HW)-normalized inverse of centred_spectrum; the imaginary residue is checked."""
    restored = np.fft.ifft2(np.fft.ifftshift(spectrum, axes=(-2, -1)), axes=(-2, -1))
    residue = np.max(np.abs(restored.imag), initial=0.0)
    if residue > IMAG_RESIDUE_TOLERANCE * max(1.0, np.max(np.abs(restored.real), initial=0.0)):
        raise FusionKernelException(f"Imaginary residue {residue:.3e} after inverse transform")
    return np.ascontiguousarray(restored.real)


def frequency_split(x_tilde: Tensor, rho: float) -> SpectrumPair:
    """Splits the centred spectrum of x~ into masked low and complementary high parts."""
    if not 0.0 <= rho <= 1.0:
        raise FusionKernelException(f"Cutoff ratio must lie in [0, 1], got {rho}")
    spectrum = centred_spectrum(x_tilde)
    if not np.all(np.isfinite(spectrum)):
        raise FusionKernelException("Non-finite spectral values in frequency_split")
    mask = low_frequency_mask(*x_tilde.shape[-2:], rho)
    return SpectrumPair(low=spectrum * mask, high=spectrum * (1.0 - mask), mask=mask)


def band_energy(x_tilde: Tensor, rho: float) -> tuple:
    """Shares of spectral energy inside and outside the low-frequency mask."""
    split = frequency_split(x_tilde, rho)
    low = float(np.sum(np.abs(split.low) ** 2))
    high = float(np.sum(np.abs(split.high) ** 2))
    total = low + high
    if total == 0.0:
        return 1.0, 0.0
    return low / total, high / total


def frequency_bands(x_tilde: Tensor, rho: float) -> tuple:
    """Spatial-domain low and high band maps of x~ (before the depthwise encoders).

    Odd extents are zero-padded on the right/bottom to even and cropped back.
    """
    height, width = x_tilde.shape[-2:]
    padded = np.pad(x_tilde, ((0, 0), (0, 0), (0, height % 2), (0, width % 2)))
    split = frequency_split(padded, rho)
    low = inverse_centred_spectrum(split.low)[..., :height, :width]
    high = inverse_centred_spectrum(split.high)[..., :height, :width]
    return ensure_finite(low, "frequency_bands"), ensure_finite(high, "frequency_bands")


def _channel_attention(band: Tensor, ca: ConvWeights) -> Tensor:
    return activate(conv2d(resample(band, "global_avg_pool"), ca), "sigmoid") * band


def frequency_expert(x_tilde: Tensor, w: AdapterWeights) -> tuple:
    """(delta_low, delta_high): depthwise-encoded, channel-reweighted bands projected to C."""
    low, high = frequency_bands(x_tilde, w.rho)
    encoded_low = _channel_attention(conv2d(low, w.freq_dw_low), w.ca_low)
    encoded_high = _channel_attention(conv2d(high, w.freq_dw_high), w.ca_high)
    return conv2d(encoded_low, w.freq_out_low), conv2d(encoded_high, w.freq_out_high)


def router_weights(x: Tensor, w: AdapterWeights) -> Tensor:
    """Per-pixel convex weights over the three experts, shape (B, 3, H, W)."""
    return activate(conv2d(x, w.router), "softmax_over_channels")


def router_fuse(x: Tensor, deltas: Sequence[Tensor], w: AdapterWeights) -> Tensor:
    """Pixel-wise weighted sum of the spatial, low and high expert outputs."""
    if len(deltas) != ROUTER_EXPERTS:
        raise FusionKernelException(
            f"router_fuse expects {ROUTER_EXPERTS} expert outputs, got {len(deltas)}")
    for delta in deltas:
        if delta.shape != x.shape:
            raise FusionKernelException(
                f"Expert output shape {delta.shape} does not match input {x.shape}")
    weights = router_weights(x, w)
    fused = weights[:, 0:1] * deltas[0]
    for index in range(1, ROUTER_EXPERTS):
        fused = fused + weights[:, index:index + 1] * deltas[index]
    return ensure_finite(fused, "router_fuse")


def adapter_forward(x: Tensor, w: AdapterWeights) -> Tensor:
    """F = X + router_fuse(X, spatial, low, high)."""
    x_tilde = project_in(x, w)
    delta_low, delta_high = frequency_expert(x_tilde, w)
    return ensure_finite(x + router_fuse(x, (spatial_expert(x_tilde, w), delta_low, delta_high), w),
                         "adapter_forward")

