"""Evaluation metrics: accuracy, macro F1, detection rate.

Attack is the positive class throughout. Per-class F1 with an empty
denominator is defined as 0, which is what makes an all-benign
predictor on an imbalanced split land near 0.49 macro F1 rather than
0.5. Detection rate is attack recall.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyInput, LengthMismatch


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(flags, labels) -> ConfusionCounts:
    """Standard confusion counts with flag=1 meaning predicted attack."""
    flags = np.asarray(flags).astype(np.int64)
    labels = np.asarray(labels).astype(np.int64)
    if flags.shape != labels.shape:
        raise LengthMismatch(
            f"flags ({flags.shape}) and labels ({labels.shape}) differ"
        )
    return ConfusionCounts(
        tp=int(np.sum((flags == 1) & (labels == 1))),
        fp=int(np.sum((flags == 1) & (labels == 0))),
        tn=int(np.sum((flags == 0) & (labels == 0))),
        fn=int(np.sum((flags == 0) & (labels == 1))),
    )


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def metrics(counts: ConfusionCounts) -> tuple[float, float, float]:
    """(accuracy, macro F1, detection rate) from confusion counts."""
    if counts.n == 0:
        raise EmptyInput("no rows to evaluate")
    accuracy = (counts.tp + counts.tn) / counts.n
    f1_attack = _f1(counts.tp, counts.fp, counts.fn)
    f1_benign = _f1(counts.tn, counts.fn, counts.fp)
    macro_f1 = (f1_attack + f1_benign) / 2.0
    positives = counts.tp + counts.fn
    detection_rate = counts.tp / positives if positives else 0.0
    return accuracy, macro_f1, detection_rate


@dataclass
class EvalRow:
    method: str
    detector: str
    scenario: str
    accuracy: float
    macro_f1: float
    detection_rate: float
    hyperparameter: int
    contamination: float
    seed: int


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    HEADER = [
        "method", "detector", "scenario", "accuracy", "macro_f1",
        "detection_rate", "hyperparameter", "contamination", "seed",
    ]

    def best(self) -> EvalRow:
        if not self.rows:
            raise EmptyInput("report has no rows")
        return max(self.rows, key=lambda r: r.macro_f1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.HEADER)
            for row in self.rows:
                record = asdict(row)
                writer.writerow([
                    record[k] if not isinstance(record[k], float)
                    else repr(record[k])
                    for k in self.HEADER
                ])

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([asdict(r) for r in self.rows], fh, indent=2, sort_keys=True)
            fh.write("\n")
