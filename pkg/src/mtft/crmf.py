"""Continuity-guided multi-scale fusion.

Information increments (how many observed steps each position can see at a
given scale) are turned into across-time weights by a softmax. The weights
average each scale's motion representation into a continuity vector, and the
continuity vectors act as queries over every per-scale, per-step motion token
to produce one temporal feature per vehicle.

Increments are statistics of the masks and carry no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masking import ScaleMaskSet, information_increments
from .numerics import ParamSet, Tensor, as_tensor, linear, masked_softmax, matmul

FUSION_SCALES = ("dk", "sqrt_dk")


def across_attention_weights(increments) -> np.ndarray:
    """Softmax of the increments along the last axis (max-subtracted)."""
    delta = np.asarray(increments, dtype=np.float64)
    if delta.shape[-1] < 1:
        raise ValueError("increments must have at least one step")
    z = np.exp(delta - delta.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


@dataclass
class ContinuityRepresentationSet:
    reps: Tensor            # (..., n, d_head)
    weights: np.ndarray     # (..., n, len)

    def __len__(self) -> int:
        return self.reps.shape[-2]


def continuity_representation(weights, rep) -> Tensor:
    """Weighted sum over steps: (..., len) weights with (..., len, d) rows -> (..., d)."""
    rep = as_tensor(rep)
    w = np.asarray(weights, dtype=rep.dtype)
    if w.shape[-1] != rep.shape[-2]:
        raise ValueError(f"weights length {w.shape[-1]} != representation length {rep.shape[-2]}")
    out = matmul(Tensor(w[..., None, :]), rep)
    return out.reshape(out.shape[:-2] + (out.shape[-1],))


def continuity_set(seqmask: np.ndarray, motion: Tensor,
                   scalemasks: ScaleMaskSet) -> ContinuityRepresentationSet:
    """Continuity vectors for every scale from the sequence masks (..., len)."""
    weights = across_attention_weights(information_increments(seqmask, scalemasks))
    return ContinuityRepresentationSet(continuity_representation(weights, motion), weights)


def init_fusion(params: ParamSet, d_head: int, d_model: int, prefix: str = "crmf") -> None:
    params.affine(f"{prefix}.q", d_head, d_head)
    params.affine(f"{prefix}.k", d_head, d_head, bias=False)
    params.affine(f"{prefix}.v", d_head, d_head)
    params.affine(f"{prefix}.out", d_head, d_model)


def fuse_multiscale(continuity, motion, params: ParamSet, prefix: str = "crmf",
                    fusion_scale: str = "dk", return_weights: bool = False):
    """Fuse (..., n, len, d) motion tokens with (..., n, d) continuity queries.

    Queries attend over all ``n * len`` tokens; the ``n`` fused rows are
    mean-pooled and projected to ``d_model``.
    """
    rc, rm = as_tensor(continuity), as_tensor(motion)
    if rm.ndim < 3 or rc.shape[-2:] != (rm.shape[-3], rm.shape[-1]) or rc.shape[:-2] != rm.shape[:-3]:
        raise ValueError(f"continuity {rc.shape} inconsistent with motion {rm.shape}")
    if fusion_scale not in FUSION_SCALES:
        raise ValueError(f"fusion_scale must be one of {FUSION_SCALES}")
    n, length, d = rm.shape[-3:]
    tokens = rm.reshape(rm.shape[:-3] + (n * length, d))
    q = linear(rc, params[f"{prefix}.q.W"], params[f"{prefix}.q.b"])
    k = linear(tokens, params[f"{prefix}.k.W"])
    v = linear(tokens, params[f"{prefix}.v.W"], params[f"{prefix}.v.b"])
    d_k = q.shape[-1]
    scale = 1.0 / d_k if fusion_scale == "dk" else 1.0 / np.sqrt(d_k)
    weights = masked_softmax(matmul(q, k.swapaxes(-1, -2)) * scale)
    fused = matmul(weights, v).mean(axis=-2)
    out = linear(fused, params[f"{prefix}.out.W"], params[f"{prefix}.out.b"])
    if return_weights:
        return out, weights
    return out
