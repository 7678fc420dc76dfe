"""CSV trajectory exports and on-disk dataset directories.

``scenes.csv`` columns (header required, comma separated, UTF-8)::

    scene_id,vehicle_id,role,t_index,x,y,observed

``role`` is ``target`` or ``neighbor``. ``t_index`` runs over
``0 .. t_h + t_f - 1``; history rows have ``t_index < t_h``, future rows are
read for the target only. ``observed`` is optional and defaults to 1.

A split lives at ``<root>/<split>/scenes.csv`` next to ``manifest.txt``,
which holds ``key = value`` lines: split, count, t_h, t_f, hz, interval,
source.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .scene import TrajectoryScene, denormalize_scene

log = logging.getLogger(__name__)

COLUMNS = ("scene_id", "vehicle_id", "role", "t_index", "x", "y", "observed")
ROLES = ("target", "neighbor")


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    t_h: int
    t_f: int
    hz: float = 10.0


@dataclass
class SceneDatasetManifest:
    split: str
    count: int
    t_h: int
    t_f: int
    hz: float
    interval: str = "none"
    source: str = "synthetic"

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in (
            ("split", self.split), ("count", self.count), ("t_h", self.t_h), ("t_f", self.t_f),
            ("hz", repr(float(self.hz))), ("interval", self.interval), ("source", self.source)))

    @classmethod
    def from_text(cls, text: str) -> "SceneDatasetManifest":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataFormatError(f"manifest line without '=': {line!r}")
            values[key.strip()] = value.strip()
        try:
            return cls(values["split"], int(values["count"]), int(values["t_h"]), int(values["t_f"]),
                       float(values["hz"]), values.get("interval", "none"), values.get("source", "synthetic"))
        except KeyError as exc:
            raise DataFormatError(f"manifest is missing key {exc}") from None


@dataclass
class SceneDataset:
    scenes: list[TrajectoryScene]
    t_h: int
    t_f: int
    hz: float = 10.0
    split: str = "train"
    interval: str = "none"
    source: str = "synthetic"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.scenes)

    def manifest(self) -> SceneDatasetManifest:
        return SceneDatasetManifest(self.split, len(self.scenes), self.t_h, self.t_f, self.hz,
                                    self.interval, self.source)


def _fmt(x: float) -> str:
    return repr(float(x))


def export_csv(scenes: Sequence[TrajectoryScene], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for sc in scenes:
            if np.any(sc.offset != 0):
                sc = denormalize_scene(sc)
            ids = sc.vehicle_ids or tuple(f"v{i}" for i in range(sc.history.shape[0]))
            for v, vid in enumerate(ids):
                role = "target" if v == 0 else "neighbor"
                for t in range(sc.t_h):
                    x, y = sc.history[v, t]
                    writer.writerow([sc.scene_id, vid, role, t, _fmt(x), _fmt(y), int(sc.masks[v, t])])
                if v == 0:
                    for k in range(sc.t_f):
                        x, y = sc.future[k]
                        writer.writerow([sc.scene_id, vid, role, sc.t_h + k, _fmt(x), _fmt(y), 1])


def ingest_csv(path: str | os.PathLike, schema: CsvSchema) -> list[TrajectoryScene]:
    """Group CSV rows into scenes, dropping what cannot form a valid scene."""
    path = Path(path)
    total = schema.t_h + schema.t_f
    scenes: dict[str, dict[str, dict]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        header = [h.strip() for h in header]
        required = COLUMNS[:-1]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataFormatError(f"{path}:1: header lacks columns {missing}")
        col = {name: header.index(name) for name in header}
        has_obs = "observed" in col
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                sid, vid, role = row[col["scene_id"]], row[col["vehicle_id"]], row[col["role"]].strip()
                t = int(row[col["t_index"]])
                x, y = float(row[col["x"]]), float(row[col["y"]])
                obs = int(row[col["observed"]]) if has_obs else 1
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if role not in ROLES:
                raise DataFormatError(f"{path}:{lineno}: unknown role {role!r}")
            if not 0 <= t < total:
                raise DataFormatError(f"{path}:{lineno}: t_index {t} outside [0, {total})")
            if obs not in (0, 1):
                raise DataFormatError(f"{path}:{lineno}: observed must be 0 or 1")
            if not (np.isfinite(x) and np.isfinite(y)):
                raise DataFormatError(f"{path}:{lineno}: non-finite coordinate")
            veh = scenes.setdefault(sid, {}).setdefault(vid, {"role": role, "rows": {}})
            if veh["role"] != role:
                raise DataFormatError(f"{path}:{lineno}: vehicle {vid!r} changes role")
            veh["rows"][t] = (x, y, obs)

    out: list[TrajectoryScene] = []
    dropped = 0
    for sid, vehicles in scenes.items():
        targets = [vid for vid, v in vehicles.items() if v["role"] == "target"]
        if len(targets) != 1:
            log.warning("scene %s: expected one target, found %d; skipped", sid, len(targets))
            continue
        order = targets + [vid for vid, v in vehicles.items() if v["role"] != "target"]
        hist, masks, ids = [], [], []
        future = None
        for vid in order:
            rows = vehicles[vid]["rows"]
            h = np.zeros((schema.t_h, 2))
            m = np.zeros(schema.t_h, dtype=np.uint8)
            for t in range(schema.t_h):
                if t in rows:
                    h[t] = rows[t][:2]
                    m[t] = rows[t][2]
            if vid == targets[0]:
                fut = [rows.get(schema.t_h + k) for k in range(schema.t_f)]
                if any(r is None or r[2] == 0 for r in fut):
                    future = None
                else:
                    future = np.array([r[:2] for r in fut])
            elif not m.any():
                dropped += 1
                continue
            hist.append(h)
            masks.append(m)
            ids.append(vid)
        if not masks[0].any():
            log.warning("scene %s: target history fully unobserved; rejected", sid)
            continue
        if future is None:
            log.warning("scene %s: target future incomplete; rejected", sid)
            continue
        scene = TrajectoryScene(sid, np.stack(hist), np.stack(masks), future, schema.hz,
                                vehicle_ids=tuple(ids))
        scene.validate()
        out.append(scene)
    if dropped:
        log.info("%s: dropped %d neighbor vehicles with no observed history", path, dropped)
    return out


def write_dataset(dataset: SceneDataset, root: str | os.PathLike) -> Path:
    split_dir = Path(root) / dataset.split
    split_dir.mkdir(parents=True, exist_ok=True)
    export_csv(dataset.scenes, split_dir / "scenes.csv")
    (split_dir / "manifest.txt").write_text(dataset.manifest().to_text(), encoding="utf-8")
    return split_dir


def read_dataset(split_dir: str | os.PathLike) -> SceneDataset:
    split_dir = Path(split_dir)
    manifest = SceneDatasetManifest.from_text((split_dir / "manifest.txt").read_text(encoding="utf-8"))
    scenes = ingest_csv(split_dir / "scenes.csv", CsvSchema(manifest.t_h, manifest.t_f, manifest.hz))
    if len(scenes) != manifest.count:
        raise DataFormatError(f"{split_dir}: manifest count {manifest.count} != {len(scenes)} scenes on disk")
    return SceneDataset(scenes, manifest.t_h, manifest.t_f, manifest.hz, manifest.split,
                        manifest.interval, manifest.source)


def find_split(path: str | os.PathLike, split: Optional[str] = None) -> Path:
    """Accept either a split directory or a dataset root plus split name."""
    path = Path(path)
    if (path / "manifest.txt").exists():
        return path
    if split and (path / split / "manifest.txt").exists():
        return path / split
    raise FileNotFoundError(f"no dataset split found at {path}" + (f" (split {split})" if split else ""))
