"""Inter-vehicle interaction attention and the recurrent trajectory decoder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import (
    ParamSet,
    Tensor,
    as_tensor,
    cumsum,
    linear,
    masked_softmax,
    matmul,
    relu,
    sigmoid,
    stack,
    tanh,
)


@dataclass
class VehicleEncoding:
    vectors: Tensor             # (..., V, d_model)
    weights: Tensor             # (..., V, V) interaction softmax
    target_index: int = 0

    @property
    def target(self) -> Tensor:
        return self.vectors[..., self.target_index, :]


def init_interaction(params: ParamSet, d_model: int, prefix: str = "interaction") -> None:
    params.affine(f"{prefix}.g", d_model, d_model)
    params.affine(f"{prefix}.w", d_model, d_model, bias=False)


def global_interaction(features, params: ParamSet, vehicle_mask: Optional[np.ndarray] = None,
                       prefix: str = "interaction") -> VehicleEncoding:
    """Inner-product attention among all vehicles, target included.

    ``features`` is (..., V, d) with the target at index 0. ``vehicle_mask``
    (..., V) marks real vehicles; padded slots are never attended to.
    """
    e = as_tensor(features)
    g = linear(e, params[f"{prefix}.g.W"], params[f"{prefix}.g.b"])
    scores = matmul(g, g.swapaxes(-1, -2))
    mask = None if vehicle_mask is None else np.asarray(vehicle_mask)[..., None, :]
    alpha = masked_softmax(scores, mask)
    v = relu(matmul(alpha, linear(e, params[f"{prefix}.w.W"])))
    return VehicleEncoding(v, alpha)


def init_decoder(params: ParamSet, d_model: int, hidden: int, prefix: str = "decoder") -> None:
    params.affine(f"{prefix}.init_h", d_model, hidden)
    params.affine(f"{prefix}.init_c", d_model, hidden)
    params.affine(f"{prefix}.x", 2, 4 * hidden)
    params.affine(f"{prefix}.h", hidden, 4 * hidden, bias=False)
    params.affine(f"{prefix}.head", hidden, 2)


def decode_future(v_tar, t_f: int, params: ParamSet, prefix: str = "decoder",
                  offset_scale: float = 1.0) -> Tensor:
    """Roll an LSTM for ``t_f`` steps from the target encoding.

    Each step emits a 2D offset (fed back as the next input); the cumulative
    sum of offsets, times ``offset_scale``, is the trajectory relative to the
    last observed target position. Returns (..., t_f, 2).
    """
    if t_f < 1:
        raise ValueError("t_f must be >= 1")
    v = as_tensor(v_tar)
    h = linear(v, params[f"{prefix}.init_h.W"], params[f"{prefix}.init_h.b"])
    c = linear(v, params[f"{prefix}.init_c.W"], params[f"{prefix}.init_c.b"])
    hidden = h.shape[-1]
    wx, bx = params[f"{prefix}.x.W"], params[f"{prefix}.x.b"]
    wh = params[f"{prefix}.h.W"]
    step_in = Tensor(np.zeros(v.shape[:-1] + (2,), dtype=v.dtype))
    offsets = []
    for _ in range(t_f):
        z = linear(step_in, wx, bx) + linear(h, wh)
        i = sigmoid(z[..., :hidden])
        f = sigmoid(z[..., hidden:2 * hidden])
        g = tanh(z[..., 2 * hidden:3 * hidden])
        o = sigmoid(z[..., 3 * hidden:])
        c = f * c + i * g
        h = o * tanh(c)
        step_in = linear(h, params[f"{prefix}.head.W"], params[f"{prefix}.head.b"])
        offsets.append(step_in)
    traj = cumsum(stack(offsets, axis=-2), axis=-2)
    if offset_scale != 1.0:
        traj = traj * offset_scale
    return traj
