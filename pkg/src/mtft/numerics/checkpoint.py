"""Parameter checkpoint files.

Layout (version 1)::

    MTFT-CHECKPOINT 1\\n
    meta <key>=<value>\\n          zero or more, free-form model metadata
    param <name> <d0,d1,...>\\n    one per parameter, payload order
    end\\n
    <payload>                      little-endian float64, C order, concatenated

A scalar parameter has an empty shape field written as ``-``.
"""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np

MAGIC = "MTFT-CHECKPOINT 1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | os.PathLike, state: dict[str, np.ndarray],
                    meta: dict[str, str] | None = None) -> None:
    header = [MAGIC]
    for key, value in (meta or {}).items():
        header.append(f"meta {key}={value}")
    for name, value in state.items():
        if " " in name:
            raise CheckpointError(f"parameter name contains a space: {name!r}")
        dims = ",".join(str(d) for d in value.shape) or "-"
        header.append(f"param {name} {dims}")
    header.append("end")
    buf = io.BytesIO()
    buf.write(("\n".join(header) + "\n").encode("utf-8"))
    for value in state.values():
        buf.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    raw = Path(path).read_bytes()
    stream = io.BytesIO(raw)
    if stream.readline().decode("utf-8").rstrip("\n") != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    meta: dict[str, str] = {}
    shapes: list[tuple[str, tuple[int, ...]]] = []
    while True:
        line = stream.readline().decode("utf-8")
        if not line:
            raise CheckpointError(f"{path}: truncated header")
        line = line.rstrip("\n")
        if line == "end":
            break
        kind, _, rest = line.partition(" ")
        if kind == "meta":
            key, _, value = rest.partition("=")
            meta[key] = value
        elif kind == "param":
            name, dims = rest.rsplit(" ", 1)
            shape = () if dims == "-" else tuple(int(d) for d in dims.split(","))
            shapes.append((name, shape))
        else:
            raise CheckpointError(f"{path}: bad header line {line!r}")
    state: dict[str, np.ndarray] = {}
    for name, shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        chunk = stream.read(8 * count)
        if len(chunk) != 8 * count:
            raise CheckpointError(f"{path}: payload too short at {name}")
        state[name] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(shape)
    if stream.read(1):
        raise CheckpointError(f"{path}: trailing bytes after payload")
    return state, meta
