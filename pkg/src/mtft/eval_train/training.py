"""Loss, Adam and the mini-batch training loop."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..data.csvio import SceneDataset
from ..data.scene import Batch, SceneArrays, make_batch, stack_scenes
from ..masking import Interval, gen_sequence_masks
from ..model import MTFTModel, ModelConfig
from ..numerics import ParamSet, Tensor, as_tensor, square
from .metrics import MetricReport, compute_metrics

log = logging.getLogger(__name__)


LR_SCHEDULES = ("constant", "cosine")


class TrainingError(RuntimeError):
    pass


def loss(pred, truth) -> Tensor:
    """Mean over steps (and batch) of the squared Euclidean error, in m^2."""
    pred = as_tensor(pred)
    truth = np.asarray(truth.data if isinstance(truth, Tensor) else truth)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction {pred.shape} and truth {truth.shape} differ")
    return square(pred - truth).sum(axis=-1).mean()


class Adam:
    def __init__(self, params: ParamSet, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps

    def step(self) -> None:
        for p in self.params:
            g = p.grad
            if g is None:
                continue
            st = p.adam_state
            st.step += 1
            st.m *= self.beta1
            st.m += (1.0 - self.beta1) * g
            st.v *= self.beta2
            st.v += (1.0 - self.beta2) * g * g
            mhat = st.m / (1.0 - self.beta1 ** st.step)
            vhat = st.v / (1.0 - self.beta2 ** st.step)
            p.tensor.data = p.tensor.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0
    interval: Optional[Interval] = (0.0, 30.0)
    lr_schedule: str = "constant"       # or "cosine": decay to 0 over all steps
    clip_norm: float = 0.0              # 0 disables global gradient-norm clipping

    def __post_init__(self):
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.lr < 0 or self.epochs < 0 or self.batch_size < 1 or self.clip_norm < 0:
            raise ValueError("lr, epochs and clip_norm must be >= 0 and batch_size >= 1")

    @property
    def variant(self) -> str:
        return self.model.variant

    def with_variant(self, variant: str) -> "TrainConfig":
        return replace(self, model=replace(self.model, variant=variant))


@dataclass
class TrainResult:
    model: MTFTModel
    losses: list[float]
    checkpoint: Optional[Path] = None


def scheduled_lr(config: TrainConfig, step: int, total: int) -> float:
    if config.lr_schedule == "cosine" and total > 0:
        return 0.5 * config.lr * (1.0 + math.cos(math.pi * step / total))
    return config.lr


def clip_gradients(params: ParamSet, max_norm: float) -> float:
    """Rescale all gradients in place so their joint norm is at most ``max_norm``."""
    norm = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.tensor.grad = p.grad * scale
    return norm


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def epoch_masks(arrays: SceneArrays, interval: Optional[Interval], rng) -> Optional[np.ndarray]:
    if interval is None:
        return None
    s, v, t = arrays.masks.shape
    return gen_sequence_masks((s, v), t, interval, rng)


def train(dataset: SceneDataset | Sequence, config: TrainConfig,
          out_dir: Optional[str | os.PathLike] = None) -> TrainResult:
    """Fit a model with Adam; masks are redrawn every epoch.

    With ``out_dir`` a checkpoint is written after every epoch together with
    ``loss_curve.csv``.
    """
    scenes = dataset.scenes if isinstance(dataset, SceneDataset) else list(dataset)
    if not scenes:
        raise TrainingError("training set is empty")
    if scenes[0].t_h != config.model.t_h or scenes[0].t_f != config.model.t_f:
        raise TrainingError(f"dataset horizons ({scenes[0].t_h}, {scenes[0].t_f}) do not match "
                            f"model ({config.model.t_h}, {config.model.t_f})")
    arrays = stack_scenes(scenes)
    model = MTFTModel(config.model, seed=config.seed)
    opt = Adam(model.params, lr=config.lr)
    rng = _rng(config.seed, 1)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    losses: list[float] = []
    n = len(arrays)
    per_epoch = -(-n // config.batch_size)
    total_steps, step = config.epochs * per_epoch, 0
    for epoch in range(config.epochs):
        masks = epoch_masks(arrays, config.interval, rng)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = make_batch(arrays, idx, None if masks is None else masks[idx])
            model.params.zero_grad()
            value = loss(model.forward(batch), batch.future)
            if not math.isfinite(value.item()):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {start} "
                                    f"(scenes {batch.scene_ids[:3]}...)")
            value.backward()
            if config.clip_norm > 0:
                clip_gradients(model.params, config.clip_norm)
            opt.lr = scheduled_lr(config, step, total_steps)
            opt.step()
            step += 1
            total += value.item() * len(idx)
        losses.append(total / n)
        log.info("epoch %d loss %.6f", epoch, losses[-1])
        if out is not None:
            model.save(out / "checkpoint.bin")
            write_loss_curve(out / "loss_curve.csv", losses)
    return TrainResult(model, losses, out / "checkpoint.bin" if out is not None else None)


def write_loss_curve(path, losses: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for i, v in enumerate(losses):
            writer.writerow([i, repr(float(v))])


def eval_masks(arrays: SceneArrays, interval: Optional[Interval], seed: int) -> Optional[np.ndarray]:
    """Masks fixed per scene for a given seed, so variants are compared on identical inputs."""
    return epoch_masks(arrays, interval, _rng(seed, 2))


@dataclass
class Evaluation:
    report: MetricReport
    predictions: np.ndarray      # (m, t_f, 2) dataset frame
    truths: np.ndarray           # (m, t_f, 2) dataset frame
    scene_ids: list[str]


def evaluate(model: MTFTModel, dataset: SceneDataset | Sequence, interval: Optional[Interval],
             seed: int, horizons: Optional[Sequence[float]] = None,
             batch_size: int = 256) -> Evaluation:
    scenes = dataset.scenes if isinstance(dataset, SceneDataset) else list(dataset)
    arrays = stack_scenes(scenes)
    masks = eval_masks(arrays, interval, seed)
    preds, truths, ids = [], [], []
    for start in range(0, len(arrays), batch_size):
        idx = np.arange(start, min(start + batch_size, len(arrays)))
        batch = make_batch(arrays, idx, None if masks is None else masks[idx])
        pred = model.forward(batch).data
        preds.append(pred + batch.origin[:, None, :])
        truths.append(batch.future + batch.origin[:, None, :])
        ids.extend(batch.scene_ids)
    preds, truths = np.concatenate(preds), np.concatenate(truths)
    report = compute_metrics(preds, truths, horizons, hz=scenes[0].hz)
    return Evaluation(report, preds, truths, ids)


def write_predictions(path, evaluation: Evaluation, hz: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scene_id", "t", "x", "y"])
        for sid, traj in zip(evaluation.scene_ids, evaluation.predictions):
            for k, (x, y) in enumerate(traj):
                writer.writerow([sid, repr((k + 1) / hz), repr(float(x)), repr(float(y))])
