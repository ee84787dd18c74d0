"""Evaluation metrics for single- and multi-label predictions, and the
first-layer weight-group report.

Conventions (declared, since toolkits differ): macro-F1 averages over the
supplied class list, where a class with no true positives, false positives,
or false negatives contributes 1.0 and a class with TP=0 but FP+FN>0
contributes 0.0; accuracy is exact-set-match.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimMismatch

# One prediction pair: (predicted label set, gold label set); both non-empty.
PredictionPair = tuple[frozenset, frozenset]


def per_class_counts(
    pairs: Sequence[PredictionPair], classes: Sequence[str]
) -> dict[str, tuple[int, int, int]]:
    """(TP, FP, FN) per class from set membership."""
    counts = {c: [0, 0, 0] for c in classes}
    for pred, gold in pairs:
        for c in pred:
            if c in gold:
                counts[c][0] += 1
            else:
                counts[c][1] += 1
        for c in gold:
            if c not in pred:
                counts[c][2] += 1
    return {c: (v[0], v[1], v[2]) for c, v in counts.items()}


def accuracy(pairs: Sequence[PredictionPair]) -> float:
    if not pairs:
        return 0.0
    return sum(1 for pred, gold in pairs if set(pred) == set(gold)) / len(pairs)


def micro_f1(pairs: Sequence[PredictionPair], classes: Sequence[str]) -> float:
    if not pairs:
        return 0.0
    tp = fp = fn = 0
    for c, (ctp, cfp, cfn) in per_class_counts(pairs, classes).items():
        tp += ctp
        fp += cfp
        fn += cfn
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 1.0


def macro_f1(pairs: Sequence[PredictionPair], classes: Sequence[str]) -> float:
    if not classes:
        return 0.0
    total = 0.0
    for c, (tp, fp, fn) in per_class_counts(pairs, classes).items():
        if tp == 0 and fp == 0 and fn == 0:
            total += 1.0
        else:
            total += 2 * tp / (2 * tp + fp + fn)
    return total / len(classes)


def metrics_report(pairs: Sequence[PredictionPair], classes: Sequence[str]) -> dict:
    """JSON-ready report: accuracy, micro/macro F1, and per-class counts."""
    counts = per_class_counts(pairs, classes)
    per_class = []
    for c in classes:
        tp, fp, fn = counts[c]
        f1 = 1.0 if tp == fp == fn == 0 else 2 * tp / (2 * tp + fp + fn)
        per_class.append({"class": c, "tp": tp, "fp": fp, "fn": fn, "f1": f1})
    return {
        "accuracy": accuracy(pairs),
        "micro_f1": micro_f1(pairs, classes),
        "macro_f1": macro_f1(pairs, classes),
        "per_class": per_class,
    }


@dataclass
class WeightReport:
    """Relative first-layer weight mass per fused-vector segment."""

    epoch: int
    fractions: dict[str, float]  # part name -> fraction in [0, 1], summing to 1

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "fractions": self.fractions}


def weight_group_analysis(mlp, segments: Iterable, epoch: int) -> WeightReport:
    """Sum |w| over first-layer weights per input segment, normalized to 1.

    `segments` are (part, offset, length) entries covering the classifier's
    input span exactly; `mlp` needs only a first-layer matrix W1 of shape
    (input_dim, hidden).
    """
    segments = list(segments)
    W1 = np.abs(np.asarray(mlp.W1, dtype=np.float64))
    span = sum(s.length for s in segments)
    if span != W1.shape[0]:
        raise DimMismatch(f"segment span {span} != classifier input dim {W1.shape[0]}")
    sums: dict[str, float] = {}
    for s in segments:
        sums[s.part] = sums.get(s.part, 0.0) + float(W1[s.offset : s.offset + s.length].sum())
    total = sum(sums.values())
    if total == 0.0:
        fractions = {name: 0.0 for name in sums}
    else:
        fractions = {name: v / total for name, v in sums.items()}
    return WeightReport(epoch, fractions)
