"""Central finite-difference checks of the analytic scan backward pass"""
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from rgbir_fusion.selective_scan import ScanGradients, ScanInputs, ss1d_backward, ss1d_scan

FD_STEP = 1e-5
SCAN_FIELDS = ("u", "delta", "A", "B_seq", "C_seq")


@dataclass(frozen=True)
class GradientReport:
    """Worst relative error per ScanInputs field"""
    errors: dict

    @property
    def max_error(self) -> float:
        """Largest error over every field"""
        return max(self.errors.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(|a|, |n|, 1) over all entries."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / scale, initial=0.0))


def num_grad(func: Callable[[np.ndarray], float], x: np.ndarray,
             step: float = FD_STEP) -> np.ndarray:
    """Central differences of a scalar function at every coordinate of x."""
    grad = np.zeros(x.shape)
    shifted = np.copy(x)
    for index in range(shifted.size):
        original = shifted.flat[index]
        shifted.flat[index] = original + step
        upper = func(shifted)
        shifted.flat[index] = original - step
        lower = func(shifted)
        shifted.flat[index] = original
        grad.flat[index] = (upper - lower) / (2.0 * step)
    return grad


def random_scan_inputs(rng: np.random.Generator, batch: int = 1, length: int = 6,
                       channels: int = 2, state: int = 3) -> ScanInputs:
    """Well-conditioned random scan: delta in [0.1, 1], A in [-2, -0.1]."""
    return ScanInputs(
        u=rng.normal(size=(batch, length, channels)),
        delta=rng.uniform(0.1, 1.0, size=(batch, length, channels)),
        A=-rng.uniform(0.1, 2.0, size=(channels, state)),
        B_seq=rng.normal(size=(batch, length, state)),
        C_seq=rng.normal(size=(batch, length, state)),
    )


def check_scan_gradients(inputs: ScanInputs, cotangent: Optional[np.ndarray] = None,
                         backward: Callable[[ScanInputs, np.ndarray], ScanGradients]
                         = ss1d_backward, step: float = FD_STEP) -> GradientReport:
    """Compares ``backward`` against central differences of <cotangent, ss1d_scan>."""
    dy = np.ones_like(inputs.u) if cotangent is None else cotangent
    analytic = backward(inputs, dy)
    errors = {}
    for name in SCAN_FIELDS:
        def objective(value, field_name=name):
            return float(np.sum(ss1d_scan(replace(inputs, **{field_name: value})) * dy))
        numeric = num_grad(objective, getattr(inputs, name), step)
        errors[name] = relative_error(getattr(analytic, name), numeric)
    return GradientReport(errors=errors)
