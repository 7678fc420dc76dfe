"""Scene records, normalisation and batching."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..masking import apply_sequence_mask


class SceneError(ValueError):
    """A scene violates its invariants."""


@dataclass
class TrajectoryScene:
    """One prediction instance; vehicle 0 is the target.

    ``offset`` is what must be added to every coordinate to get back to the
    dataset frame (zero for raw scenes).
    """

    scene_id: str
    history: np.ndarray                  # (V, t_h, 2)
    masks: np.ndarray                    # (V, t_h) uint8, 1 = observed
    future: np.ndarray                   # (t_f, 2) target ground truth
    hz: float = 10.0
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2))
    vehicle_ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        self.history = np.asarray(self.history, dtype=np.float64)
        self.masks = np.asarray(self.masks, dtype=np.uint8)
        self.future = np.asarray(self.future, dtype=np.float64)
        self.offset = np.asarray(self.offset, dtype=np.float64)

    @property
    def t_h(self) -> int:
        return self.history.shape[1]

    @property
    def t_f(self) -> int:
        return self.future.shape[0]

    @property
    def n_neighbors(self) -> int:
        return self.history.shape[0] - 1

    @property
    def target_history(self) -> np.ndarray:
        return self.history[0]

    @property
    def target_mask(self) -> np.ndarray:
        return self.masks[0]

    @property
    def neighbor_histories(self) -> np.ndarray:
        return self.history[1:]

    def validate(self) -> None:
        h, m, f = self.history, self.masks, self.future
        if h.ndim != 3 or h.shape[-1] != 2 or h.shape[0] < 1:
            raise SceneError(f"{self.scene_id}: history must be (V, t_h, 2), got {h.shape}")
        if m.shape != h.shape[:2]:
            raise SceneError(f"{self.scene_id}: masks {m.shape} do not match history {h.shape}")
        if f.ndim != 2 or f.shape[1] != 2 or f.shape[0] < 1:
            raise SceneError(f"{self.scene_id}: future must be (t_f, 2), got {f.shape}")
        if not m[0].any():
            raise SceneError(f"{self.scene_id}: target history has no observed point")
        if not (np.isfinite(h).all() and np.isfinite(f).all() and np.isfinite(self.offset).all()):
            raise SceneError(f"{self.scene_id}: non-finite coordinates")

    def equals(self, other: "TrajectoryScene") -> bool:
        return (self.scene_id == other.scene_id and self.hz == other.hz
                and np.array_equal(self.history, other.history)
                and np.array_equal(self.masks, other.masks)
                and np.array_equal(self.future, other.future)
                and np.array_equal(self.offset, other.offset))


def last_observed_index(masks: np.ndarray) -> np.ndarray:
    """Index of the last 1 along the final axis (0 for rows with no 1)."""
    masks = np.asarray(masks)
    t = masks.shape[-1]
    return t - 1 - np.argmax(masks[..., ::-1] != 0, axis=-1)


def normalize_scene(scene: TrajectoryScene) -> TrajectoryScene:
    """Translate so the target's last observed history position is the origin."""
    idx = last_observed_index(scene.target_mask)
    anchor = scene.history[0, idx].copy()
    if not scene.target_mask[idx]:
        raise SceneError(f"{scene.scene_id}: target history has no observed point")
    return dataclasses.replace(
        scene,
        history=scene.history - anchor,
        future=scene.future - anchor,
        offset=scene.offset + anchor,
    )


def denormalize_scene(scene: TrajectoryScene) -> TrajectoryScene:
    return dataclasses.replace(
        scene,
        history=scene.history + scene.offset,
        future=scene.future + scene.offset,
        offset=np.zeros(2),
    )


def masked_history(scene: TrajectoryScene) -> np.ndarray:
    return apply_sequence_mask(scene.history, scene.masks)


@dataclass
class SceneArrays:
    """Dataset stacked into padded arrays for fast batching."""

    history: np.ndarray        # (S, V, t_h, 2)
    masks: np.ndarray          # (S, V, t_h)
    vehicle_mask: np.ndarray   # (S, V)
    future: np.ndarray         # (S, t_f, 2)
    offset: np.ndarray         # (S, 2)
    scene_ids: list[str]

    def __len__(self) -> int:
        return len(self.scene_ids)


def stack_scenes(scenes: Sequence[TrajectoryScene]) -> SceneArrays:
    if not scenes:
        raise SceneError("cannot stack an empty scene list")
    s, v = len(scenes), max(sc.history.shape[0] for sc in scenes)
    t_h, t_f = scenes[0].t_h, scenes[0].t_f
    history = np.zeros((s, v, t_h, 2))
    masks = np.zeros((s, v, t_h), dtype=np.uint8)
    vehicle_mask = np.zeros((s, v), dtype=np.uint8)
    future = np.zeros((s, t_f, 2))
    offset = np.zeros((s, 2))
    for i, sc in enumerate(scenes):
        if sc.t_h != t_h or sc.t_f != t_f:
            raise SceneError(f"{sc.scene_id}: horizons differ from the rest of the dataset")
        n = sc.history.shape[0]
        history[i, :n] = sc.history
        masks[i, :n] = sc.masks
        vehicle_mask[i, :n] = 1
        future[i] = sc.future
        offset[i] = sc.offset
    return SceneArrays(history, masks, vehicle_mask, future, offset, [sc.scene_id for sc in scenes])


@dataclass
class Batch:
    """Model input in target-relative coordinates with missing steps zeroed."""

    history: np.ndarray        # (B, V, t_h, 2)
    seq_mask: np.ndarray       # (B, V, t_h)
    vehicle_mask: np.ndarray   # (B, V)
    future: np.ndarray         # (B, t_f, 2)
    origin: np.ndarray         # (B, 2) dataset-frame position of the normalised origin
    scene_ids: list[str]

    def __len__(self) -> int:
        return self.history.shape[0]


def make_batch(arrays: SceneArrays, index=None, extra_masks: Optional[np.ndarray] = None) -> Batch:
    """Combine masks, normalise to the target's last observed point, zero-fill.

    ``extra_masks`` (B, V, t_h) are generated sequence masks ANDed with the
    scene's own observation flags. If that leaves a real vehicle with nothing
    observed, the vehicle keeps its own flags.
    """
    if index is None:
        index = np.arange(len(arrays))
    index = np.asarray(index)
    hist = arrays.history[index]
    own = arrays.masks[index]
    vmask = arrays.vehicle_mask[index]
    seq = own if extra_masks is None else own & np.asarray(extra_masks, dtype=np.uint8)
    empty = (seq.sum(axis=-1) == 0) & (vmask == 1)
    if empty.any():
        seq = np.where(empty[..., None], own, seq)
    seq = seq * vmask[..., None]
    b = np.arange(len(index))
    anchor = hist[b, 0, last_observed_index(seq[:, 0])]
    history = (hist - anchor[:, None, None, :]) * seq[..., None]
    future = arrays.future[index] - anchor[:, None, :]
    origin = arrays.offset[index] + anchor
    return Batch(history, seq.astype(np.uint8), vmask, future, origin,
                 [arrays.scene_ids[i] for i in index])
