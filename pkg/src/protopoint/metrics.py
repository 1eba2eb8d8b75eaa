"""Segmentation metrics over predicted vs ground-truth binary masks.

IoU, precision, recall and F1 are reported both micro-pooled (pixel counts
pooled before the ratio) and as the class-mean mIoU (per-class IoU averaged,
degenerate classes excluded). Reports round to 3 decimal places.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeMismatch
from .formats import AnnotationMask

REPORT_DECIMALS = 3


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ShapeMismatch("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )


@dataclass(frozen=True)
class MetricSet:
    iou: float
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def confusion(pred: AnnotationMask, gt: AnnotationMask) -> ConfusionCounts:
    """Per-pixel tally of the two masks."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ShapeMismatch(
            f"pred {pred.height}x{pred.width} vs gt {gt.height}x{gt.width}"
        )
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def metrics(counts: ConfusionCounts) -> MetricSet:
    """Derive IoU/precision/recall/F1; a fully empty pred+gt pair is
    flagged degenerate (all metrics 0.0) and excluded from class means.
    """
    degenerate = (counts.tp + counts.fp + counts.fn) == 0
    iou = _ratio(counts.tp, counts.tp + counts.fp + counts.fn)
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    f1 = _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn)
    return MetricSet(iou, precision, recall, f1, degenerate)


def mean_over_classes(
    ious: Sequence[float], degenerate: Sequence[bool] | None = None
) -> float:
    """Average per-class IoU, skipping classes flagged degenerate."""
    if degenerate is None:
        kept = list(ious)
    else:
        if len(degenerate) != len(ious):
            raise ShapeMismatch("degenerate flags must align with the IoU list")
        kept = [v for v, d in zip(ious, degenerate) if not d]
    if not kept:
        return 0.0
    return float(sum(kept) / len(kept))


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Aligned-column text table; floats render to 3 decimal places."""
    def cell(v: object) -> str:
        if isinstance(v, float):
            return f"{v:.{REPORT_DECIMALS}f}"
        return str(v)

    grid = [[cell(v) for v in row] for row in rows]
    widths = [
        max(len(h), *(len(r[i]) for r in grid)) if grid else len(h)
        for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in grid:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def report_json(obj: dict) -> str:
    """Deterministic JSON report with floats rounded to 3 decimals."""
    def round_floats(v):
        if isinstance(v, float):
            return round(v, REPORT_DECIMALS)
        if isinstance(v, dict):
            return {k: round_floats(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [round_floats(x) for x in v]
        return v

    return json.dumps(round_floats(obj), indent=2, sort_keys=True) + "\n"
