"""Selective scan kernels: SS1D forward/backward and directional SS2D"""
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from einops import rearrange, repeat

from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.tensor_core import Tensor, ensure_finite

DIRECTIONS = ("h_fwd", "h_bwd", "v_fwd", "v_bwd")


@dataclass(frozen=True)
class ScanInputs:
    """
    Bundle driving one selective scan.
    u, delta: (B, L, D); A: (D, N); B_seq, C_seq: (B, L, N) shared by every
    channel or (B, L, G, N) with the D channels split into G contiguous groups.
    """
    u: Tensor
    delta: Tensor
    A: Tensor
    B_seq: Tensor
    C_seq: Tensor

    @property
    def dims(self) -> tuple:
        """(batch, length, channels, state) extents"""
        batch, length, channels = self.u.shape
        return batch, length, channels, self.A.shape[1]

    def validate(self) -> "ScanInputs":
        """Checks shape agreement and delta positivity."""
        if self.u.ndim != 3 or self.A.ndim != 2:
            raise FusionKernelException(
                f"Scan expects u (B, L, D) and A (D, N), got {self.u.shape} and {self.A.shape}")
        batch, length, channels, state = self.dims
        if self.delta.shape != self.u.shape:
            raise FusionKernelException(
                f"Scan delta shape {self.delta.shape} does not match u {self.u.shape}")
        if self.A.shape[0] != channels:
            raise FusionKernelException(
                f"Scan A shape {self.A.shape} does not match D={channels}")
        for name, seq in (("B_seq", self.B_seq), ("C_seq", self.C_seq)):
            if seq.shape[:2] != (batch, length) or seq.shape[-1] != state \
                    or seq.ndim not in (3, 4) or (seq.ndim == 4 and channels % seq.shape[2]):
                raise FusionKernelException(
                    f"Scan {name} shape {seq.shape} disagrees with u {self.u.shape} "
                    f"and A {self.A.shape}")
        if not np.all(self.delta > 0):
            raise FusionKernelException("Scan delta must be strictly positive")
        return self


@dataclass(frozen=True)
class ScanGradients:
    """Cotangents of a scan with respect to each ScanInputs field"""
    u: Tensor
    delta: Tensor
    A: Tensor
    B_seq: Tensor
    C_seq: Tensor


@dataclass(frozen=True)
class DirectionParams:
    """Scan parameters of one direction, in that direction's sequence order"""
    delta: Tensor
    A: Tensor
    B_seq: Tensor
    C_seq: Tensor


def _per_channel(seq: Tensor, channels: int) -> Tensor:
    if seq.ndim == 3:
        return np.broadcast_to(seq[:, :, None, :], seq.shape[:2] + (channels, seq.shape[-1]))
    return repeat(seq, "b l g n -> b l (g k) n", k=channels // seq.shape[2])


def _reduce_to(grad: Tensor, seq: Tensor) -> Tensor:
    if seq.ndim == 3:
        return grad.sum(axis=2)
    return rearrange(grad, "b l (g k) n -> b l g k n", g=seq.shape[2]).sum(axis=3)


def _discretize(inputs: ScanInputs) -> tuple:
    channels = inputs.dims[2]
    decay = np.exp(inputs.delta[..., None] * inputs.A[None, None])
    b_full = _per_channel(inputs.B_seq, channels)
    drive = (inputs.delta * inputs.u)[..., None] * b_full
    return decay, b_full, drive


def _run_scan(inputs: ScanInputs) -> tuple:
    inputs.validate()
    batch, length, channels, state = inputs.dims
    decay, b_full, drive = _discretize(inputs)
    c_full = _per_channel(inputs.C_seq, channels)
    states = np.empty((batch, length, channels, state))
    hidden = np.zeros((batch, channels, state))
    for step in range(length):
        hidden = decay[:, step] * hidden + drive[:, step]
        states[:, step] = hidden
    y = np.einsum("bldn,bldn->bld", states, c_full)
    return y, states, decay, b_full, c_full


def ss1d_scan(inputs: ScanInputs) -> Tensor:
    """
    Causal selective scan with zero initial state:
    h_t = exp(delta_t A) h_{t-1} + delta_t B_t u_t,  y_t = <C_t, h_t>.
    Runs in time and memory linear in L.
    """
    y, *_ = _run_scan(inputs)
    return ensure_finite(y, "ss1d_scan")


def ss1d_backward(inputs: ScanInputs, dy: Tensor) -> ScanGradients:
    """Adjoint of ss1d_scan, computed with one reverse-time scan."""
    if dy.shape != inputs.u.shape:
        raise FusionKernelException(
            f"Scan cotangent shape {dy.shape} does not match output {inputs.u.shape}")
    _, states, decay, b_full, c_full = _run_scan(inputs)
    length = inputs.dims[1]
    adjoint = np.empty_like(states)
    carry = np.zeros(states.shape[:1] + states.shape[2:])
    for step in range(length - 1, -1, -1):
        adjoint[:, step] = dy[:, step, :, None] * c_full[:, step] + carry
        carry = decay[:, step] * adjoint[:, step]
    previous = np.concatenate([np.zeros_like(states[:, :1]), states[:, :-1]], axis=1)
    decay_grad = adjoint * previous * decay
    delta_e = inputs.delta[..., None]
    u_e = inputs.u[..., None]
    grads = ScanGradients(
        u=np.einsum("bldn,bldn->bld", adjoint, b_full) * inputs.delta,
        delta=(decay_grad * inputs.A[None, None]).sum(axis=-1)
        + np.einsum("bldn,bldn->bld", adjoint, b_full) * inputs.u,
        A=(decay_grad * delta_e).sum(axis=(0, 1)),
        B_seq=_reduce_to(adjoint * delta_e * u_e, inputs.B_seq),
        C_seq=_reduce_to(dy[..., None] * states, inputs.C_seq),
    )
    for name in ("u", "delta", "A", "B_seq", "C_seq"):
        ensure_finite(getattr(grads, name), f"ss1d_backward {name}")
    return grads


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise FusionKernelException(f"Unknown scan direction: {direction}")


def unfold_direction(x: Tensor, direction: str) -> Tensor:
    """Flattens a BCHW map into a (B, HW, C) sequence in the given scan order."""
    _check_direction(direction)
    if direction.startswith("h"):
        seq = rearrange(x, "b c h w -> b (h w) c")
    else:
        seq = rearrange(x, "b c h w -> b (w h) c")
    if direction.endswith("bwd"):
        seq = seq[:, ::-1]
    return np.ascontiguousarray(seq)


def fold_direction(seq: Tensor, direction: str, height: int, width: int) -> Tensor:
    """Inverse of unfold_direction."""
    _check_direction(direction)
    if direction.endswith("bwd"):
        seq = seq[:, ::-1]
    if direction.startswith("h"):
        out = rearrange(seq, "b (h w) c -> b c h w", h=height, w=width)
    else:
        out = rearrange(seq, "b (w h) c -> b c h w", h=height, w=width)
    return np.ascontiguousarray(out)


def ss2d(x: Tensor, params: Mapping[str, DirectionParams],
         directions: Optional[Sequence[str]] = None) -> Tensor:
    """Sum over directions of SS1D applied to each unfolding, folded back to H x W."""
    directions = tuple(params) if directions is None else tuple(directions)
    if not directions:
        raise FusionKernelException("ss2d needs at least one scan direction")
    height, width = x.shape[2:]
    out = np.zeros_like(x)
    for direction in directions:
        if direction not in params:
            raise FusionKernelException(f"Missing scan parameters for direction {direction}")
        p = params[direction]
        scanned = ss1d_scan(ScanInputs(unfold_direction(x, direction), p.delta, p.A,
                                       p.B_seq, p.C_seq))
        out += fold_direction(scanned, direction, height, width)
    return ensure_finite(out, "ss2d")
