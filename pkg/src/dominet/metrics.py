"""Confusion-table metrics, ROC/AUC, and Youden-J cutoff selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionTable:
    tp: float
    fp: float
    fn: float
    tn: float

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")
        if self.tp + self.fp + self.fn + self.tn <= 0:
            raise ValidationError("confusion table must be non-empty")

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricSet:
    ppv: float
    npv: float
    tpr: float
    tnr: float
    balanced_accuracy: float
    error_rate: float
    undefined: tuple[str, ...] = ()  # metrics with zero denominator (value is nan)

    def to_record(self) -> dict:
        return {
            "ppv": self.ppv,
            "npv": self.npv,
            "tpr": self.tpr,
            "tnr": self.tnr,
            "balanced_accuracy": self.balanced_accuracy,
            "error_rate": self.error_rate,
            "undefined": list(self.undefined),
        }


def confusion_metrics(ct: ConfusionTable) -> MetricSet:
    """PPV, NPV, TPR, TNR, balanced accuracy, error rate; zero denominators flagged."""
    undefined = []

    def ratio(num, den, name):
        if den <= 0:
            undefined.append(name)
            return math.nan
        return num / den

    ppv = ratio(ct.tp, ct.tp + ct.fp, "ppv")
    npv = ratio(ct.tn, ct.tn + ct.fn, "npv")
    tpr = ratio(ct.tp, ct.tp + ct.fn, "tpr")
    tnr = ratio(ct.tn, ct.tn + ct.fp, "tnr")
    bal = (tpr + tnr) / 2.0
    if math.isnan(bal):
        undefined.append("balanced_accuracy")
    return MetricSet(
        ppv=ppv, npv=npv, tpr=tpr, tnr=tnr,
        balanced_accuracy=bal,
        error_rate=(ct.fp + ct.fn) / ct.total,
        undefined=tuple(undefined),
    )


def _check_classes(labels: np.ndarray):
    if labels.sum() == 0 or labels.sum() == labels.size:
        raise ValidationError("both classes must be present")


def roc_auc(scores, labels) -> tuple[float, list[tuple[float, float]]]:
    """Rank-based AUC (ties count half) and the threshold-sweep ROC curve.

    The curve runs from (0,0) to (1,1); points are added at every distinct
    score treated as a '>= threshold -> positive' rule.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must have equal length")
    _check_classes(labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos

    ranks = rankdata(scores)  # average ranks handle ties as half-wins
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    curve = [(0.0, 0.0)]
    for t in np.unique(scores)[::-1]:
        pred = scores >= t
        fpr = float((pred & (labels == 0)).sum()) / n_neg
        tpr = float((pred & (labels == 1)).sum()) / n_pos
        curve.append((fpr, tpr))
    if curve[-1] != (1.0, 1.0):
        curve.append((1.0, 1.0))
    return float(auc), curve


def optimal_cutoff(scores, labels) -> tuple[float, MetricSet, ConfusionTable]:
    """Threshold (among distinct scores) maximizing Youden's J; ties -> lower threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must have equal length")
    _check_classes(labels)

    best = None  # (J, threshold, ct)
    for t in np.unique(scores):
        pred = scores >= t
        tp = float((pred & (labels == 1)).sum())
        fp = float((pred & (labels == 0)).sum())
        fn = float((~pred & (labels == 1)).sum())
        tn = float((~pred & (labels == 0)).sum())
        j = tp / (tp + fn) - fp / (fp + tn)
        if best is None or j > best[0]:
            best = (j, float(t), ConfusionTable(tp, fp, fn, tn))
    _, threshold, ct = best
    return threshold, confusion_metrics(ct), ct
