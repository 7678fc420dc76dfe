"""Multi-scale attention head encoder.

Each vehicle history (zero-filled at missing steps) is lifted to ``d_model``
by a two-layer perceptron, a sinusoidal position table is added, and the
sequence passes through ``layers`` post-norm Transformer blocks. Head ``i``
of every block is restricted by scale mask ``i``. The final block can stop
right after its heads so the per-scale outputs are available unconcatenated
(the motion representations consumed by the fusion module).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .masking import ScaleMaskSet, build_scale_masks
from .numerics import (
    ParamSet,
    Tensor,
    as_tensor,
    init_mlp,
    layer_norm,
    linear,
    masked_softmax,
    matmul,
    mlp_apply,
    mlp_layers,
    relu,
)


@dataclass(frozen=True)
class EncoderConfig:
    length: int
    n_heads: int = 5
    layers: int = 4
    d_model: int = 128
    d_ff: Optional[int] = None
    scales: Optional[tuple[int, ...]] = None
    positional: bool = True
    heads_only_last: bool = True

    def __post_init__(self):
        if self.d_model < self.n_heads:
            raise ValueError(f"d_model ({self.d_model}) must be >= n_heads ({self.n_heads})")
        if self.layers < 1 or self.length < 1:
            raise ValueError("layers and length must be positive")
        if self.scales is not None and len(self.scales) != self.n_heads:
            raise ValueError(f"{len(self.scales)} scales given for {self.n_heads} heads")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def ffn_width(self) -> int:
        return self.d_ff or 2 * self.d_model

    def scale_masks(self) -> ScaleMaskSet:
        return build_scale_masks(self.length, self.n_heads, self.scales)


@dataclass
class MotionRepresentationSet:
    """Per-scale, per-step head outputs of the last block, shape (..., n, len, d_head)."""

    reps: Tensor

    def __len__(self) -> int:
        return self.reps.shape[-3]

    def __getitem__(self, i: int) -> Tensor:
        return self.reps[..., i, :, :]


@dataclass
class EncoderOutput:
    motion: MotionRepresentationSet
    hidden: Optional[Tensor]           # (..., len, d_model) when the last block is complete
    attention: list[np.ndarray] = field(default_factory=list)   # per layer (..., n, len, len)


def positional_table(length: int, d_model: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d_model)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def init_encoder(params: ParamSet, cfg: EncoderConfig, prefix: str = "encoder") -> None:
    d, n, dk = cfg.d_model, cfg.n_heads, cfg.d_head
    init_mlp(params, f"{prefix}.embed", [2, d, d])
    for layer in range(cfg.layers):
        p = f"{prefix}.layer{layer}"
        params.affine(f"{p}.attn.q", d, n * dk)
        # a key bias only shifts each softmax row by a constant
        params.affine(f"{p}.attn.k", d, n * dk, bias=False)
        params.affine(f"{p}.attn.v", d, n * dk)
        if layer == cfg.layers - 1 and cfg.heads_only_last:
            break
        params.affine(f"{p}.attn.out", n * dk, d)
        params.constant(f"{p}.norm1.gain", (d,), 1.0)
        params.constant(f"{p}.norm1.bias", (d,), 0.0)
        init_mlp(params, f"{p}.ffn", [d, cfg.ffn_width, d])
        params.constant(f"{p}.norm2.gain", (d,), 1.0)
        params.constant(f"{p}.norm2.bias", (d,), 0.0)


def embed_with_pos(masked_traj, params: ParamSet, cfg: EncoderConfig,
                   prefix: str = "encoder") -> Tensor:
    """Lift (..., len, 2) coordinates to (..., len, d_model) and add positions."""
    x = as_tensor(masked_traj)
    if x.shape[-1] != 2 or x.shape[-2] != cfg.length:
        raise ValueError(f"expected (..., {cfg.length}, 2) coordinates, got {x.shape}")
    h = mlp_apply(mlp_layers(params, f"{prefix}.embed"), x)
    if cfg.positional:
        h = h + positional_table(cfg.length, cfg.d_model).astype(h.dtype)
    return h


def scale_attention(q, k, v, scalemask) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention restricted to the support of ``scalemask``.

    Returns ``(output, weights)``; weights are exactly zero off the mask.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    dk = q.shape[-1]
    logits = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dk))
    weights = masked_softmax(logits, scalemask)
    return matmul(weights, v), weights


def _split_heads(x: Tensor, n: int) -> Tensor:
    lead = x.shape[:-1]
    x = x.reshape(lead + (n, x.shape[-1] // n))
    nd = x.ndim
    return x.swapaxes(nd - 3, nd - 2)          # (..., n, len, dk)


def _merge_heads(x: Tensor) -> Tensor:
    nd = x.ndim
    x = x.swapaxes(nd - 3, nd - 2)              # (..., len, n, dk)
    return x.reshape(x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def _heads(h: Tensor, params: ParamSet, p: str, cfg: EncoderConfig, masks: np.ndarray):
    n = cfg.n_heads
    q = _split_heads(linear(h, params[f"{p}.attn.q.W"], params[f"{p}.attn.q.b"]), n)
    k = _split_heads(linear(h, params[f"{p}.attn.k.W"]), n)
    v = _split_heads(linear(h, params[f"{p}.attn.v.W"], params[f"{p}.attn.v.b"]), n)
    return scale_attention(q, k, v, masks)


def encode_multiscale(masked_traj, params: ParamSet, cfg: EncoderConfig,
                      prefix: str = "encoder", keep_attention: bool = False) -> EncoderOutput:
    """Run the full encoder on (..., len, 2) zero-filled coordinates."""
    masks = cfg.scale_masks().masks
    h = embed_with_pos(masked_traj, params, cfg, prefix)
    attention: list[np.ndarray] = []
    heads = None
    for layer in range(cfg.layers):
        p = f"{prefix}.layer{layer}"
        heads, weights = _heads(h, params, p, cfg, masks)
        if keep_attention:
            attention.append(weights.data.copy())
        if layer == cfg.layers - 1 and cfg.heads_only_last:
            return EncoderOutput(MotionRepresentationSet(heads), None, attention)
        attn = linear(_merge_heads(heads), params[f"{p}.attn.out.W"], params[f"{p}.attn.out.b"])
        h = layer_norm(h + attn, params[f"{p}.norm1.gain"], params[f"{p}.norm1.bias"])
        ff = mlp_apply(mlp_layers(params, f"{p}.ffn"), h)
        h = layer_norm(h + ff, params[f"{p}.norm2.gain"], params[f"{p}.norm2.bias"])
    return EncoderOutput(MotionRepresentationSet(heads), h, attention)
