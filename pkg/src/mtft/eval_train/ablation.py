"""Variant x missing-interval ablation grid."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from ..data.csvio import SceneDataset
from ..masking import Interval, format_interval
from .metrics import MetricReport
from .training import TrainConfig, evaluate, train, write_loss_curve

log = logging.getLogger(__name__)

ABLATION_COLUMNS = ("variant", "interval", "horizon", "rmse", "ade", "fde", "mr", "seed")


@dataclass
class AblationRow:
    variant: str
    interval: Optional[Interval]
    seed: int
    report: MetricReport
    losses: list[float]

    def csv_row(self) -> list[str]:
        horizon = max(self.report.rmse_at)
        r = self.report
        return [self.variant, format_interval(self.interval), f"{horizon:g}", repr(r.rmse_at[horizon]),
                repr(r.ade), repr(r.fde), repr(r.mr), str(self.seed)]


def run_ablation(train_set: SceneDataset, test_set: SceneDataset, base: TrainConfig,
                 variants: Sequence[str] = ("vtf", "mtf", "mtft"),
                 intervals: Sequence[Optional[Interval]] = ((0.0, 30.0), (30.0, 60.0), (60.0, 90.0)),
                 seeds: Optional[Sequence[int]] = None,
                 horizons: Optional[Sequence[float]] = None,
                 out_dir: Optional[str | os.PathLike] = None) -> list[AblationRow]:
    """Train and evaluate every (seed, interval, variant) with shared seeds.

    Evaluation masks depend only on the seed and interval, so every variant
    is scored on the same incomplete inputs.
    """
    seeds = list(seeds) if seeds is not None else [base.seed]
    rows: list[AblationRow] = []
    for seed in seeds:
        for interval in intervals:
            for variant in variants:
                cfg = replace(base.with_variant(variant), seed=seed, interval=interval)
                result = train(train_set, cfg)
                ev = evaluate(result.model, test_set, interval, seed, horizons)
                log.info("%s %s seed=%d ade=%.4f", variant, format_interval(interval), seed, ev.report.ade)
                rows.append(AblationRow(variant, interval, seed, ev.report, result.losses))
    if out_dir is not None:
        write_ablation(rows, out_dir)
    return rows


def write_ablation(rows: Sequence[AblationRow], out_dir: str | os.PathLike) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ABLATION_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_row())
    with open(out / "rmse_by_horizon.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "interval", "seed", "horizon", "rmse"])
        for row in rows:
            for h, v in row.report.rmse_at.items():
                writer.writerow([row.variant, format_interval(row.interval), row.seed, f"{h:g}", repr(v)])
    curves = out / "loss_curves"
    curves.mkdir(exist_ok=True)
    for row in rows:
        name = f"{row.variant}_{format_interval(row.interval)}_seed{row.seed}.csv"
        write_loss_curve(curves / name, row.losses)
