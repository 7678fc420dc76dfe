"""Sequence masks, scale masks, observation matrices and information increments.

Conventions: a sequence mask is a 0/1 ``uint8`` vector over the observation
horizon (1 = observed). Scale ``s`` lets position ``a`` attend to ``b`` iff
``(a - b) % s == 0``. Scales default to ``1..n``.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

Interval = tuple[float, float]


def parse_interval(text: str) -> Interval:
    """Parse ``"60-90"`` (percent, half-open on the left) into ``(60.0, 90.0)``."""
    lo, sep, hi = text.strip().partition("-")
    if not sep:
        raise ValueError(f"interval must look like 'lo-hi', got {text!r}")
    interval = (float(lo), float(hi))
    check_interval(interval)
    return interval


def format_interval(interval: Interval | None) -> str:
    if interval is None:
        return "none"
    return f"{interval[0]:g}-{interval[1]:g}"


def check_interval(interval: Interval) -> None:
    lo, hi = interval
    degenerate = lo == hi == 0
    if not degenerate and not (0 <= lo < hi <= 90):
        raise ValueError(f"missing interval must satisfy 0 <= lo < hi <= 90 (percent), got {interval}")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _admissible_counts(length: int, interval: Interval) -> tuple[int, int]:
    """Smallest and largest zero counts whose fraction falls in (lo, hi]."""
    lo, hi = interval
    kmin = math.floor(length * lo / 100.0) + 1
    kmax = math.floor(length * hi / 100.0 + 1e-9)
    return kmin, kmax


def gen_sequence_masks(shape: Sequence[int], length: int, interval: Interval, rng) -> np.ndarray:
    """Draw independent sequence masks for every index of ``shape``.

    For each mask a missing percentage ``p`` is drawn uniformly from
    ``(lo, hi]`` and ``round(length * p)`` positions are zeroed, chosen
    uniformly without replacement. The count is nudged into the integers
    whose fraction lies in ``(lo, hi]`` when that set is non-empty, and is
    capped at ``length - 1`` so one observation always survives.
    """
    check_interval(interval)
    if length < 2:
        raise ValueError("sequence masks need length >= 2")
    shape = tuple(shape)
    rng = _as_rng(rng)
    lo, hi = interval
    if hi == 0:
        return np.ones(shape + (length,), dtype=np.uint8)
    p = hi - rng.uniform(0.0, hi - lo, size=shape)
    counts = np.rint(length * p / 100.0).astype(np.int64)
    kmin, kmax = _admissible_counts(length, interval)
    if kmin <= kmax:
        counts = np.clip(counts, kmin, kmax)
    if np.any(counts >= length):
        log.warning("interval %s admits an all-missing mask at length %d; keeping one observation",
                    format_interval(interval), length)
        counts = np.minimum(counts, length - 1)
    ranks = np.argsort(rng.random(shape + (length,)), axis=-1, kind="stable").argsort(axis=-1, kind="stable")
    return (ranks >= counts[..., None]).astype(np.uint8)


def gen_sequence_mask(length: int, interval: Interval, rng_seed) -> np.ndarray:
    return gen_sequence_masks((), length, interval, rng_seed)


def apply_sequence_mask(traj: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero-fill missing steps: ``traj[t]`` kept where ``mask[t] == 1``."""
    traj = np.asarray(traj, dtype=np.float64)
    mask = np.asarray(mask)
    if traj.shape[:-1] != mask.shape:
        raise ValueError(f"trajectory {traj.shape} and mask {mask.shape} disagree")
    return traj * mask[..., None].astype(traj.dtype)


@dataclass(frozen=True)
class ScaleMaskSet:
    masks: np.ndarray          # (n, len, len) uint8
    scales: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.scales)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.masks[i]

    @property
    def length(self) -> int:
        return self.masks.shape[-1]


def build_scale_masks(length: int, n: int | None = None,
                      scales: Sequence[int] | None = None) -> ScaleMaskSet:
    if scales is None:
        if n is None or n < 1:
            raise ValueError("need n >= 1 or an explicit scale list")
        scales = range(1, n + 1)
    scales = tuple(int(s) for s in scales)
    if length < 1 or any(s < 1 for s in scales):
        raise ValueError("length and scales must be positive")
    idx = np.arange(length)
    diff = idx[:, None] - idx[None, :]
    masks = np.stack([(diff % s == 0) for s in scales]).astype(np.uint8)
    return ScaleMaskSet(masks, scales)


@dataclass(frozen=True)
class ObservationMatrix:
    cells: np.ndarray          # (..., n, len, len) uint8
    increments: np.ndarray     # (..., n, len) int64


def build_observation_matrix(seqmask: np.ndarray, scalemasks: ScaleMaskSet) -> ObservationMatrix:
    """``cells[i, j, l] = seqmask[l] * scalemask_i[j, l]``; increments are row sums.

    ``seqmask`` may carry leading batch axes.
    """
    seqmask = np.asarray(seqmask)
    if seqmask.shape[-1] != scalemasks.length:
        raise ValueError(f"sequence mask length {seqmask.shape[-1]} != scale mask side {scalemasks.length}")
    cells = seqmask[..., None, None, :].astype(np.uint8) * scalemasks.masks
    return ObservationMatrix(cells, cells.sum(axis=-1, dtype=np.int64))


def information_increments(seqmask: np.ndarray, scalemasks: ScaleMaskSet) -> np.ndarray:
    """Row sums of the observation matrices without materialising them."""
    seqmask = np.asarray(seqmask, dtype=np.int64)
    return np.einsum("...l,njl->...nj", seqmask, scalemasks.masks.astype(np.int64))


def write_mask_csv(path: str | os.PathLike, rows: np.ndarray) -> None:
    rows = np.atleast_2d(np.asarray(rows))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([int(v) for v in row])


def read_mask_csv(path: str | os.PathLike) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[int(v) for v in row] for row in csv.reader(fh) if row], dtype=np.uint8)
