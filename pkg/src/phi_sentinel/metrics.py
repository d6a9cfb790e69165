"""Ranking and confusion-matrix metrics.

AUROC is the trapezoidal area under the exact ROC step curve with tied scores
grouped; the accumulation is done in integer arithmetic with one final
division, so it agrees exactly with the pairwise (ties count half) oracle.
AUPRC is average precision over the step curve, no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricSet", "roc_auc", "average_precision", "compute_metrics"]

METRIC_NAMES = (
    "auroc", "auprc", "sensitivity", "specificity",
    "precision", "npv", "accuracy", "f1",
)


@dataclass
class MetricSet:
    auroc: float
    auprc: float
    sensitivity: float
    specificity: float
    precision: float
    npv: float
    accuracy: float
    f1: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _tie_groups(scores, labels):
    """Yield (pos_count, neg_count) per distinct score, descending."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    i = 0
    while i < len(order):
        j = i
        tp = fp = 0
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            if labels[order[j]] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        yield tp, fp
        i = j


def roc_auc(scores, labels) -> float:
    """Trapezoidal AUROC over the tie-grouped ROC step curve."""
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    pos = sum(labels)
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise ValueError("AUROC needs both classes present")
    area2 = 0
    tp = fp = 0
    for dtp, dfp in _tie_groups(scores, labels):
        area2 += dfp * (2 * tp + dtp)  # trapezoid: dfp * (tp_prev + tp_cur)
        tp += dtp
        fp += dfp
    return area2 / (2 * pos * neg)


def average_precision(scores, labels) -> float:
    """Step-wise average precision: sum of dR * P over descending tie groups."""
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    pos = sum(labels)
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise ValueError("average precision needs both classes present")
    ap = 0.0
    tp = fp = 0
    for dtp, dfp in _tie_groups(scores, labels):
        tp += dtp
        fp += dfp
        if dtp:
            ap += (dtp * tp) / (pos * (tp + fp))
    return ap


def _ratio(num: int, den: int) -> float:
    # Zero-denominator confusion ratios are defined as 0.0.
    return num / den if den else 0.0


def compute_metrics(scores, labels, threshold: float = 0.5) -> MetricSet:
    """All eight metrics at once.

    Threshold metrics predict positive at score >= threshold.  With
    single-class labels the ranking metrics are undefined and reported as
    NaN while the confusion metrics are still returned.
    """
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    try:
        auroc = roc_auc(scores, labels)
        auprc = average_precision(scores, labels)
    except ValueError:
        auroc = math.nan
        auprc = math.nan
    tp = fp = tn = fn = 0
    for s, y in zip(scores, labels):
        if s >= threshold:
            if y == 1:
                tp += 1
            else:
                fp += 1
        else:
            if y == 1:
                fn += 1
            else:
                tn += 1
    sens = _ratio(tp, tp + fn)
    spec = _ratio(tn, tn + fp)
    prec = _ratio(tp, tp + fp)
    npv = _ratio(tn, tn + fn)
    acc = _ratio(tp + tn, tp + tn + fp + fn)
    f1 = 2 * prec * sens / (prec + sens) if (prec + sens) > 0 else 0.0
    return MetricSet(auroc=auroc, auprc=auprc, sensitivity=sens, specificity=spec,
                     precision=prec, npv=npv, accuracy=acc, f1=f1)
