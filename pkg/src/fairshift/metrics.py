"""Accuracy and group-fairness metrics from per-subgroup confusion counts.

SPD is the absolute acceptance-rate gap |P(pred=1|S=1) - P(pred=1|S=0)|,
EOD the absolute true-positive-rate gap |P(pred=1|Y=1,S=1) -
P(pred=1|Y=1,S=0)|. Metrics that would condition on an empty cell come back
as None; aggregation treats None as an explicit missing value, never as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset


@dataclass(frozen=True)
class ConfusionBySubgroup:
    """counts[y][s][pred] over the four subgroups and two predictions."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2, 2, 2) or (counts < 0).any():
            raise ValueError("counts must be a non-negative 2x2x2 table")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def group_total(self, s: int) -> int:
        return int(self.counts[:, s, :].sum())

    def acceptance_rate(self, s: int) -> float | None:
        total = self.group_total(s)
        if total == 0:
            return None
        return float(self.counts[:, s, 1].sum()) / total

    def tpr(self, s: int) -> float | None:
        positives = int(self.counts[1, s, :].sum())
        if positives == 0:
            return None
        return float(self.counts[1, s, 1]) / positives


def confusion(preds, ds: LabeledDataset) -> ConfusionBySubgroup:
    preds = np.asarray(preds, dtype=np.int8)
    if preds.shape != (ds.n,):
        raise ValueError(f"predictions length {preds.shape} != dataset rows {ds.n}")
    if not np.isin(preds, (0, 1)).all():
        raise ValueError("predictions must be exactly 0 or 1")
    counts = np.zeros((2, 2, 2), dtype=np.int64)
    for y in (0, 1):
        for s in (0, 1):
            rows = (ds.labels == y) & (ds.groups == s)
            counts[y, s, 1] = int(preds[rows].sum())
            counts[y, s, 0] = int(rows.sum()) - counts[y, s, 1]
    return ConfusionBySubgroup(counts)


def error_rate(conf: ConfusionBySubgroup) -> float:
    wrong = int(conf.counts[0, :, 1].sum() + conf.counts[1, :, 0].sum())
    return wrong / conf.n


def spd(conf: ConfusionBySubgroup) -> float | None:
    """Absolute acceptance-rate difference; None if a group is empty."""
    r0, r1 = conf.acceptance_rate(0), conf.acceptance_rate(1)
    if r0 is None or r1 is None:
        return None
    return abs(r1 - r0)


def eod(conf: ConfusionBySubgroup) -> float | None:
    """Absolute TPR difference; None if a (Y=1, S=s) cell is empty."""
    t0, t1 = conf.tpr(0), conf.tpr(1)
    if t0 is None or t1 is None:
        return None
    return abs(t1 - t0)
