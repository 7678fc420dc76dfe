"""Challenging-scenario selection.

A scene is challenging when, over the prediction horizon, the target moves
more than 5 m laterally or its longitudinal speed changes by more than
20 km/h. Both axes come from the target heading at its last observed point:
the last observed history displacement, or the first future displacement
when only one history point is observed.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .scene import TrajectoryScene, last_observed_index

LATERAL_THRESHOLD_M = 5.0
SPEED_CHANGE_THRESHOLD_KMH = 20.0
SPEED_WINDOW = 5


def heading(scene: TrajectoryScene) -> np.ndarray:
    obs = np.flatnonzero(scene.target_mask)
    p0 = scene.target_history[obs[-1]]
    candidates = []
    if len(obs) >= 2:
        candidates.append(p0 - scene.target_history[obs[-2]])
    candidates.append(scene.future[0] - p0)
    candidates.append(scene.future[-1] - p0)
    for d in candidates:
        norm = np.hypot(*d)
        if norm > 1e-9:
            return d / norm
    return np.array([1.0, 0.0])


def maneuver_stats(scene: TrajectoryScene) -> tuple[float, float]:
    """(max |lateral displacement| in m, longitudinal speed change in km/h)."""
    last = int(last_observed_index(scene.target_mask))
    p0 = scene.target_history[last]
    u = heading(scene)
    n = np.array([-u[1], u[0]])
    rel = scene.future - p0
    lateral = float(np.max(np.abs(rel @ n)))

    pts = np.vstack([p0, scene.future])
    steps = np.concatenate([[last], scene.t_h + np.arange(scene.t_f)]) / scene.hz
    speed = np.diff(pts @ u) / np.diff(steps)
    w = min(SPEED_WINDOW, len(speed))
    smooth = np.convolve(speed, np.ones(w) / w, mode="valid")
    dv_kmh = float((smooth.max() - smooth.min()) * 3.6)
    return lateral, dv_kmh


def is_challenging(scene: TrajectoryScene, lateral_threshold: float = LATERAL_THRESHOLD_M,
                   speed_threshold_kmh: float = SPEED_CHANGE_THRESHOLD_KMH) -> bool:
    lateral, dv = maneuver_stats(scene)
    return lateral > lateral_threshold or dv > speed_threshold_kmh


def has_partial_history(scene: TrajectoryScene) -> bool:
    frac = 1.0 - scene.target_mask.mean()
    return 0.0 < frac < 1.0


def filter_challenging(scenes: Iterable[TrajectoryScene], require_missing: bool = False,
                       lateral_threshold: float = LATERAL_THRESHOLD_M,
                       speed_threshold_kmh: float = SPEED_CHANGE_THRESHOLD_KMH) -> list[TrajectoryScene]:
    kept = []
    for sc in scenes:
        if require_missing and not has_partial_history(sc):
            continue
        if is_challenging(sc, lateral_threshold, speed_threshold_kmh):
            kept.append(sc)
    return kept
