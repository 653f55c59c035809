"""Seeded initializers for convolution, normalization and linear weights"""
import numpy as np

from rgbir_fusion.tensor_core import ConvWeights, LinearWeights, NormWeights


def init_conv(rng: np.random.Generator, c_out: int, c_in: int, size: int = 1,
              groups: int = 1, bias: bool = True, zero: bool = False) -> ConvWeights:
    """Fan-in scaled normal kernel; ``zero`` gives an all-zero kernel and bias."""
    shape = (c_out, c_in // groups, size, size)
    if zero:
        kernel = np.zeros(shape)
    else:
        kernel = rng.normal(0.0, 1.0 / np.sqrt(shape[1] * size * size), shape)
    return ConvWeights(kernel=kernel, bias=np.zeros(c_out) if bias else None, groups=groups)


def init_depthwise(rng: np.random.Generator, channels: int, size: int,
                   bias: bool = True, zero: bool = False) -> ConvWeights:
    """Depthwise kernel (groups = C_in = C_out)."""
    return init_conv(rng, channels, channels, size, groups=channels, bias=bias, zero=zero)


def delta_conv(channels: int, size: int = 3) -> ConvWeights:
    """Depthwise kernel with a single 1 at the centre tap: the identity map."""
    kernel = np.zeros((channels, 1, size, size))
    kernel[:, 0, size // 2, size // 2] = 1.0
    return ConvWeights(kernel=kernel, bias=None, groups=channels)


def init_norm(channels: int) -> NormWeights:
    """Unit scale, zero shift."""
    return NormWeights(gamma=np.ones(channels), beta=np.zeros(channels))


def init_linear(rng: np.random.Generator, c_out: int, c_in: int, bias: bool = True,
                zero: bool = False) -> LinearWeights:
    """Fan-in scaled dense map for token sequences."""
    shape = (c_out, c_in)
    weight = np.zeros(shape) if zero else rng.normal(0.0, 1.0 / np.sqrt(c_in), shape)
    return LinearWeights(weight=weight, bias=np.zeros(c_out) if bias else None)


def init_state_matrix(channels: int, state_dim: int) -> np.ndarray:
    """Real diagonal state matrix A = -(1..N) for every channel."""
    return -np.tile(np.arange(1, state_dim + 1, dtype=np.float64), (channels, 1))


def init_delta_bias(rng: np.random.Generator, channels: int, dt_min: float = 1e-3,
                    dt_max: float = 1e-1) -> np.ndarray:
    """Inverse-softplus of step sizes drawn log-uniformly in [dt_min, dt_max]."""
    steps = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), channels))
    return steps + np.log(-np.expm1(-steps))
