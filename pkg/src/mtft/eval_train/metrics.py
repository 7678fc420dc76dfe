"""Displacement metrics for single-hypothesis trajectory prediction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MISS_THRESHOLD_M = 2.0


@dataclass
class MetricReport:
    rmse_at: dict[float, float]
    ade: float
    fde: float
    mr: float
    count: int
    rmse_total: float = field(default=float("nan"))

    def as_row(self) -> dict[str, float]:
        row = {"ade": self.ade, "fde": self.fde, "mr": self.mr, "count": self.count}
        row.update({f"rmse@{h:g}s": v for h, v in self.rmse_at.items()})
        return row


def default_horizons(t_f: int, hz: float) -> list[float]:
    """Whole seconds covered by the prediction horizon (at least the final step)."""
    whole = int(np.floor(t_f / hz + 1e-9))
    return [float(s) for s in range(1, whole + 1)] or [t_f / hz]


def horizon_step(horizon: float, hz: float, t_f: int) -> int:
    step = int(round(horizon * hz)) - 1
    if not 0 <= step < t_f:
        raise ValueError(f"horizon {horizon}s is outside the {t_f}-step prediction window at {hz} Hz")
    return step


def compute_metrics(preds, truths, horizons: Optional[Sequence[float]] = None,
                    hz: float = 10.0) -> MetricReport:
    """RMSE per horizon, ADE, FDE and miss rate (FDE > 2 m).

    ``preds`` and ``truths`` are (m, t_f, 2) in metres.
    """
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"prediction shape {preds.shape} != truth shape {truths.shape}")
    if preds.ndim != 3 or preds.shape[0] == 0:
        raise ValueError("metrics need a non-empty (m, t_f, 2) set")
    m, t_f = preds.shape[:2]
    sq = ((preds - truths) ** 2).sum(axis=-1)
    dist = np.sqrt(sq)
    horizons = list(horizons) if horizons is not None else default_horizons(t_f, hz)
    rmse_at = {float(h): float(np.sqrt(sq[:, horizon_step(h, hz, t_f)].mean())) for h in horizons}
    final = dist[:, -1]
    return MetricReport(
        rmse_at=rmse_at,
        ade=float(dist.mean()),
        fde=float(final.mean()),
        mr=float((final > MISS_THRESHOLD_M).mean()),
        count=m,
        rmse_total=float(np.sqrt(sq.sum() / m)),
    )
