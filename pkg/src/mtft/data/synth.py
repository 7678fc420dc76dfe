"""Synthetic highway/urban scenes from simple kinematic families.

Families: constant velocity (``cv``), constant acceleration with a stop at
zero speed (``ca``), lane change along a rescaled logistic lateral profile
(``lane_change``), and a constant-radius turn capped at 90 degrees
(``turn``). All vehicles drive along +x before any manoeuvre. Each scene is
generated from its own ``(seed, index)`` stream, so scenes can be produced
independently and in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .scene import TrajectoryScene

FAMILIES = ("cv", "ca", "lane_change", "turn")
DEFAULT_MIX = {"cv": 1.0, "ca": 1.0, "lane_change": 1.0, "turn": 1.0}
CHALLENGING_MIX = {"ca": 1.0, "lane_change": 1.0, "turn": 1.0}
LANE_WIDTH = 3.5


@dataclass(frozen=True)
class Maneuver:
    """Parameters of one vehicle track; ``positions`` evaluates it in closed form."""

    family: str
    x0: float
    y0: float
    speed: float
    accel: float = 0.0
    lateral: float = 0.0          # lane change: total lateral shift (m)
    rate: float = 2.0             # lane change: logistic steepness (1/s)
    t_event: float = 0.0          # lane-change midpoint or turn start (s)
    radius: float = 30.0          # turn radius (m), sign of ``lateral`` picks left/right
    t_end: float = 1.0            # lane change: time at which the full shift is reached

    def positions(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.family == "cv":
            return np.stack([self.x0 + self.speed * t, np.full_like(t, self.y0)], axis=-1)
        if self.family == "ca":
            return np.stack([self.x0 + _travel(self.speed, self.accel, t), np.full_like(t, self.y0)], axis=-1)
        if self.family == "lane_change":
            return np.stack([self.x0 + self.speed * t, self.y0 + self._lane_offset(t)], axis=-1)
        if self.family == "turn":
            return self._turn(t)
        raise ValueError(f"unknown kinematic family {self.family!r}")

    def _lane_offset(self, t: np.ndarray) -> np.ndarray:
        def sig(u):
            return 1.0 / (1.0 + np.exp(-self.rate * (u - self.t_event)))
        lo, hi = sig(0.0), sig(self.t_end)
        return self.lateral * (sig(t) - lo) / (hi - lo)

    def _turn(self, t: np.ndarray) -> np.ndarray:
        side = 1.0 if self.lateral >= 0 else -1.0
        r, v = self.radius, self.speed
        arc_time = (math.pi / 2) * r / v
        tau = np.clip(t - self.t_event, 0.0, arc_time)
        theta = v * tau / r
        x = self.x0 + v * np.minimum(t, self.t_event) + r * np.sin(theta)
        y = self.y0 + side * r * (1.0 - np.cos(theta))
        after = np.maximum(t - self.t_event - arc_time, 0.0)
        # past the arc the heading is +-y
        y = y + side * v * after
        return np.stack([x, y], axis=-1)


def _travel(v0: float, a: float, t: np.ndarray) -> np.ndarray:
    """Distance covered under constant acceleration, never reversing."""
    if a < 0:
        t_stop = -v0 / a
        tt = np.minimum(t, t_stop)
        return v0 * tt + 0.5 * a * tt * tt
    return v0 * t + 0.5 * a * t * t


def _pick(rng: np.random.Generator, mix: Mapping[str, float]) -> str:
    names = sorted(mix)
    weights = np.array([mix[n] for n in names], dtype=np.float64)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError(f"invalid kinematics mix {dict(mix)}")
    unknown = set(names) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown kinematic families {sorted(unknown)}")
    return names[int(rng.choice(len(names), p=weights / weights.sum()))]


def sample_target(rng: np.random.Generator, family: str, t_now: float, t_end: float) -> Maneuver:
    x0 = rng.uniform(0.0, 400.0)
    y0 = LANE_WIDTH * int(rng.integers(0, 4))
    if family == "cv":
        return Maneuver("cv", x0, y0, rng.uniform(8.0, 35.0))
    if family == "ca":
        accel = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 4.0)
        return Maneuver("ca", x0, y0, rng.uniform(10.0, 35.0), accel=accel)
    if family == "lane_change":
        shift = rng.choice([-1.0, 1.0]) * LANE_WIDTH * int(rng.integers(1, 3))
        return Maneuver("lane_change", x0, y0, rng.uniform(10.0, 35.0), lateral=shift,
                        rate=rng.uniform(1.5, 3.0), t_event=t_now + rng.uniform(-0.5, 1.5), t_end=t_end)
    if family == "turn":
        side = rng.choice([-1.0, 1.0])
        return Maneuver("turn", x0, y0, rng.uniform(5.0, 12.0), lateral=side,
                        radius=rng.uniform(12.0, 40.0), t_event=t_now + rng.uniform(-0.5, 1.0))
    raise ValueError(f"unknown kinematic family {family!r}")


def sample_neighbor(rng: np.random.Generator, target: Maneuver) -> Maneuver:
    lane = int(rng.choice([-1, 0, 1]))
    gap = rng.uniform(10.0, 40.0) * rng.choice([-1.0, 1.0])
    speed = max(2.0, target.speed + rng.uniform(-5.0, 5.0))
    accel = rng.uniform(-1.0, 1.0)
    return Maneuver("ca", target.x0 + gap, target.y0 + lane * LANE_WIDTH, speed, accel=accel)


def synth_scene(index: int, t_h: int, t_f: int, hz: float, mix: Mapping[str, float],
                seed: int, n_neighbors: int = 2, noise: float = 0.1) -> TrajectoryScene:
    rng = np.random.default_rng([seed, index])
    times = np.arange(t_h + t_f) / hz
    t_now, t_end = times[t_h - 1], times[-1]
    target = sample_target(rng, _pick(rng, mix), t_now, t_end)
    tracks = [target] + [sample_neighbor(rng, target) for _ in range(n_neighbors)]
    pos = np.stack([m.positions(times) for m in tracks])
    if noise > 0:
        pos = pos + rng.normal(0.0, noise, size=pos.shape)
    return TrajectoryScene(
        scene_id=f"synth-{index:06d}",
        history=pos[:, :t_h],
        masks=np.ones((len(tracks), t_h), dtype=np.uint8),
        future=pos[0, t_h:],
        hz=hz,
        vehicle_ids=tuple(f"v{i}" for i in range(len(tracks))),
    )


def synth_generate(count: int, t_h: int = 20, t_f: int = 30, hz: float = 10.0,
                   kinematics_mix: Optional[Mapping[str, float]] = None, seed: int = 0,
                   n_neighbors: int = 2, noise: float = 0.1) -> list[TrajectoryScene]:
    if count < 1:
        raise ValueError("count must be >= 1")
    if t_h < 2 or t_f < 1:
        raise ValueError("need t_h >= 2 and t_f >= 1")
    mix = dict(kinematics_mix or DEFAULT_MIX)
    return [synth_scene(i, t_h, t_f, hz, mix, seed, n_neighbors, noise) for i in range(count)]


def synth_challenging(count: int, t_h: int = 20, t_f: int = 30, hz: float = 10.0,
                      kinematics_mix: Optional[Mapping[str, float]] = None, seed: int = 0,
                      n_neighbors: int = 2, noise: float = 0.1,
                      max_tries: Optional[int] = None) -> list[TrajectoryScene]:
    """Generate scenes and keep those passing the challenging-scenario filter."""
    from .filters import is_challenging

    mix = dict(kinematics_mix or CHALLENGING_MIX)
    max_tries = max_tries or 50 * count
    kept: list[TrajectoryScene] = []
    index = 0
    while len(kept) < count:
        if index >= max_tries:
            raise RuntimeError(f"only {len(kept)} challenging scenes after {index} draws")
        scene = synth_scene(index, t_h, t_f, hz, mix, seed, n_neighbors, noise)
        if is_challenging(scene):
            kept.append(scene)
        index += 1
    return kept


def parse_mix(text: str) -> dict[str, float]:
    """``"cv:1,lane_change:2"`` -> ``{"cv": 1.0, "lane_change": 2.0}``."""
    mix = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, weight = part.partition(":")
        mix[name.strip()] = float(weight) if weight else 1.0
    return mix


def format_mix(mix: Mapping[str, float]) -> str:
    return ",".join(f"{k}:{mix[k]:g}" for k in sorted(mix))
