"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradcheckReport:
    max_rel_err: float
    worst_param: str
    worst_index: tuple[int, ...]
    checked: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_err < tol

    def __str__(self) -> str:
        return (f"max_rel_err={self.max_rel_err:.3e} worst_param={self.worst_param}"
                f"{list(self.worst_index)} checked={self.checked}")


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def _evaluate(f: Callable[[], Tensor]) -> float:
    value = f().item()
    if not math.isfinite(value):
        raise FloatingPointError(f"gradcheck: objective is not finite ({value})")
    return value


def gradcheck(f: Callable[[], Tensor], params: Sequence[Tensor], seed: int = 0,
              step: float = 1e-6, max_elements: int | None = None) -> GradcheckReport:
    """Compare backprop gradients of the scalar ``f()`` with central differences.

    ``params`` are leaf tensors that ``f`` closes over; they are perturbed in
    place and restored. With ``max_elements`` set, a seeded random subset of
    that many elements (at least 256) is checked instead of all of them.
    """
    params = list(params)
    for p in params:
        if p.data.dtype != np.float64:
            raise TypeError("gradcheck requires float64 parameters")
        p.grad = None
    _evaluate(f)
    out = f()
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    index = [(pi, flat) for pi, p in enumerate(params) for flat in range(p.data.size)]
    if max_elements is not None and len(index) > max(max_elements, 256):
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(index), size=max(max_elements, 256), replace=False))
        index = [index[i] for i in pick]

    worst = (0.0, "", ())
    for pi, flat in index:
        p = params[pi]
        pos = np.unravel_index(flat, p.data.shape)
        orig = p.data[pos]
        p.data[pos] = orig + step
        fp = _evaluate(f)
        p.data[pos] = orig - step
        fm = _evaluate(f)
        p.data[pos] = orig
        numeric = (fp - fm) / (2.0 * step)
        err = relative_error(float(analytic[pi][pos]), numeric)
        if err > worst[0] or not worst[1]:
            worst = (err, p.name or f"param{pi}", tuple(int(i) for i in pos))
    return GradcheckReport(worst[0], worst[1], worst[2], len(index))
