"""Binary classification metrics with explicit undefined-value flags."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class MetricsReport:
    """Confusion counts plus derived metrics.

    Metrics that are undefined for the given counts (zero denominators) are
    None rather than silently zero; ``f1`` is None whenever precision or
    recall is, and 0.0 when both are defined but zero.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    n_samples: int
    label_positive_fraction: float
    predicted_positive_fraction: float

    def format_lines(self):
        def fmt(v):
            return "undefined" if v is None else f"{v:.4f}"

        return [
            f"samples:   {self.n_samples}",
            f"confusion: TP={self.tp} FP={self.fp} TN={self.tn} FN={self.fn}",
            f"accuracy:  {self.accuracy:.4f}",
            f"precision: {fmt(self.precision)}",
            f"recall:    {fmt(self.recall)}",
            f"f1:        {fmt(self.f1)}",
            f"positive fraction: labels {self.label_positive_fraction:.4f}, "
            f"predictions {self.predicted_positive_fraction:.4f}",
        ]


def evaluate(predictions: Sequence[int], labels: Sequence[int]) -> MetricsReport:
    """Exact confusion counts and derived metrics for binary sequences."""
    preds = np.asarray(predictions, dtype=int)
    labs = np.asarray(labels, dtype=int)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise ValueError(
            f"predictions and labels must be equal-length 1D, got {preds.shape} vs {labs.shape}"
        )
    if preds.size == 0:
        raise ValueError("cannot evaluate zero samples")
    for arr, name in ((preds, "predictions"), (labs, "labels")):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary")

    tp = int(np.sum((preds == 1) & (labs == 1)))
    fp = int(np.sum((preds == 1) & (labs == 0)))
    tn = int(np.sum((preds == 0) & (labs == 0)))
    fn = int(np.sum((preds == 0) & (labs == 1)))
    n = preds.size

    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)

    return MetricsReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        n_samples=n,
        label_positive_fraction=float(labs.mean()),
        predicted_positive_fraction=float(preds.mean()),
    )
