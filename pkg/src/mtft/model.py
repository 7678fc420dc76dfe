"""Full predictor and its ablation variants.

``vtf``   every head sees the whole sequence; temporal feature = mean over steps
``mtf``   head i restricted to scale i; temporal feature = mean over steps
``mtft``  scale-restricted heads feeding the continuity-guided fusion
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .crmf import continuity_set, fuse_multiscale, init_fusion
from .data.scene import Batch
from .encoder import EncoderConfig, encode_multiscale, init_encoder
from .interaction_decoder import decode_future, global_interaction, init_decoder, init_interaction
from .numerics import ParamSet, Tensor, load_checkpoint, save_checkpoint

VARIANTS = ("vtf", "mtf", "mtft")


@dataclass(frozen=True)
class ModelConfig:
    t_h: int = 20
    t_f: int = 30
    variant: str = "mtft"
    d_model: int = 128
    n_heads: int = 5
    layers: int = 4
    d_ff: int = 0                 # 0 -> 2 * d_model
    positional: bool = True
    fusion_scale: str = "dk"
    coord_scale: float = 10.0
    dtype: str = "float64"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.coord_scale <= 0:
            raise ValueError("coord_scale must be positive")

    def encoder(self) -> EncoderConfig:
        scales = (1,) * self.n_heads if self.variant == "vtf" else tuple(range(1, self.n_heads + 1))
        return EncoderConfig(
            length=self.t_h, n_heads=self.n_heads, layers=self.layers, d_model=self.d_model,
            d_ff=self.d_ff or None, scales=scales, positional=self.positional,
            heads_only_last=self.variant == "mtft",
        )

    def to_meta(self) -> dict[str, str]:
        return {k: str(v) for k, v in asdict(self).items()}

    @classmethod
    def from_meta(cls, meta: dict[str, str]) -> "ModelConfig":
        kwargs = {}
        for f in fields(cls):
            if f.name not in meta:
                continue
            raw = meta[f.name]
            if f.type in ("bool", bool):
                kwargs[f.name] = raw == "True"
            elif f.type in ("int", int):
                kwargs[f.name] = int(raw)
            elif f.type in ("float", float):
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = raw
        return cls(**kwargs)


@dataclass
class ForwardTrace:
    attention: list[np.ndarray]                 # per layer (B, V, n, t_h, t_h)
    across_weights: Optional[np.ndarray]        # (B, V, n, t_h)
    continuity: Optional[np.ndarray]            # (B, V, n, d_head)
    fusion_weights: Optional[np.ndarray]        # (B, V, n, n * t_h)
    interaction: np.ndarray                     # (B, V, V)


class MTFTModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.enc_cfg = config.encoder()
        self.scale_masks = self.enc_cfg.scale_masks()
        self.params = ParamSet(seed, dtype=np.dtype(config.dtype))
        init_encoder(self.params, self.enc_cfg)
        if config.variant == "mtft":
            init_fusion(self.params, self.enc_cfg.d_head, config.d_model)
        init_interaction(self.params, config.d_model)
        init_decoder(self.params, config.d_model, config.d_model)

    def temporal_features(self, history: np.ndarray, seq_mask: np.ndarray, trace: Optional[dict] = None) -> Tensor:
        """Per-vehicle temporal features (B, V, d_model) from zero-filled histories."""
        cfg = self.config
        b, v = history.shape[:2]
        x = Tensor((history / cfg.coord_scale).reshape(b * v, cfg.t_h, 2).astype(cfg.dtype))
        enc = encode_multiscale(x, self.params, self.enc_cfg, keep_attention=trace is not None)
        if cfg.variant == "mtft":
            cs = continuity_set(seq_mask.reshape(b * v, cfg.t_h), enc.motion.reps, self.scale_masks)
            feat, fw = fuse_multiscale(cs.reps, enc.motion.reps, self.params,
                                       fusion_scale=cfg.fusion_scale, return_weights=True)
            if trace is not None:
                trace["across_weights"] = cs.weights.reshape(b, v, *cs.weights.shape[1:])
                trace["continuity"] = cs.reps.data.reshape(b, v, *cs.reps.shape[1:])
                trace["fusion_weights"] = fw.data.reshape(b, v, *fw.shape[1:])
        else:
            feat = enc.hidden.mean(axis=-2)
        if trace is not None:
            trace["attention"] = [a.reshape(b, v, *a.shape[1:]) for a in enc.attention]
        return feat.reshape(b, v, cfg.d_model)

    def forward(self, batch: Batch, trace: Optional[dict] = None) -> Tensor:
        """Predicted target trajectory (B, t_f, 2) relative to the batch origin."""
        feat = self.temporal_features(batch.history, batch.seq_mask, trace)
        inter = global_interaction(feat, self.params, batch.vehicle_mask)
        if trace is not None:
            trace["interaction"] = inter.weights.data
        return decode_future(inter.target, self.config.t_f, self.params,
                             offset_scale=self.config.coord_scale)

    def trace(self, batch: Batch) -> tuple[np.ndarray, ForwardTrace]:
        store: dict = {}
        pred = self.forward(batch, store)
        return pred.data, ForwardTrace(store["attention"], store.get("across_weights"),
                                       store.get("continuity"), store.get("fusion_weights"),
                                       store["interaction"])

    def predict(self, batch: Batch) -> np.ndarray:
        """Predictions in the dataset frame."""
        return self.forward(batch).data + batch.origin[:, None, :]

    def save(self, path) -> None:
        save_checkpoint(path, self.params.state(), self.config.to_meta())

    @classmethod
    def load(cls, path) -> "MTFTModel":
        state, meta = load_checkpoint(path)
        model = cls(ModelConfig.from_meta(meta), seed=0)
        model.params.load_state(state)
        return model
