"""Named parameters, seeded initialisation and the MLP helper."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .tensor import ShapeError, Tensor, linear, relu


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass
class Parameter:
    name: str
    tensor: Tensor
    adam_state: AdamState = field(init=False)

    def __post_init__(self):
        self.tensor.requires_grad = True
        self.tensor.name = self.name
        data = self.tensor.data
        self.adam_state = AdamState(np.zeros_like(data), np.zeros_like(data))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tensor.shape

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad


class ParamSet:
    """Ordered collection of parameters addressed by dotted name paths.

    Parameters are initialised in creation order from a single generator, so
    a fixed seed and a fixed build order give bitwise-identical weights.
    """

    def __init__(self, seed: int | None = 0, dtype=np.float64):
        self.rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Parameter] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name].tensor

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def parameter(self, name: str) -> Parameter:
        return self._params[name]

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        param = Parameter(name, Tensor(np.asarray(value, dtype=self.dtype)))
        self._params[name] = param
        return param.tensor

    def uniform(self, name: str, shape: Sequence[int], fan_in: int) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, self.rng.uniform(-bound, bound, size=tuple(shape)))

    def constant(self, name: str, shape: Sequence[int], value: float) -> Tensor:
        return self.add(name, np.full(tuple(shape), value))

    def affine(self, prefix: str, d_in: int, d_out: int, bias: bool = True):
        """Create ``prefix.W`` (d_in, d_out) and optionally ``prefix.b``."""
        w = self.uniform(f"{prefix}.W", (d_in, d_out), d_in)
        b = self.uniform(f"{prefix}.b", (d_out,), d_in) if bias else None
        return w, b

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.tensor.grad = None

    def num_elements(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) ^ set(state)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for name, p in self._params.items():
            value = np.asarray(state[name], dtype=self.dtype)
            if value.shape != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {value.shape} != {p.shape}")
            p.tensor.data = value.copy()


def init_mlp(params: ParamSet, prefix: str, sizes: Sequence[int]) -> list[tuple[Tensor, Tensor]]:
    """Create an affine stack ``sizes[0] -> sizes[1] -> ... -> sizes[-1]``."""
    return [params.affine(f"{prefix}.{i}", sizes[i], sizes[i + 1])
            for i in range(len(sizes) - 1)]


def mlp_layers(params: ParamSet, prefix: str) -> list[tuple[Tensor, Tensor]]:
    layers = []
    i = 0
    while f"{prefix}.{i}.W" in params:
        layers.append((params[f"{prefix}.{i}.W"], params[f"{prefix}.{i}.b"]))
        i += 1
    return layers


def mlp_apply(layers: Sequence[tuple[Tensor, Tensor | None]], x) -> Tensor:
    """Affine layers with ReLU between them; the last layer stays linear."""
    if not layers:
        raise ValueError("mlp_apply needs at least one layer")
    h = x
    for i, (w, b) in enumerate(layers):
        if h.shape[-1] != w.shape[0]:
            raise ShapeError(f"mlp layer {i}: input width {h.shape[-1]} != weight {w.shape}")
        h = linear(h, w, b)
        if i < len(layers) - 1:
            h = relu(h)
    return h
