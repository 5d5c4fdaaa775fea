"""Confusion-matrix based evaluation with macro averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTestSet
from .network import Network
from .train import EVAL_BATCH


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with true classes on rows, predictions on columns."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool = False


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: tuple[ClassMetrics, ...]


def metrics_from_confusion(cm: np.ndarray) -> Metrics:
    """One-vs-rest precision/recall/F1 per class, macro averages, accuracy.

    A class with an undefined ratio (no predicted or no actual
    positives) reports 0 for the affected metric and sets its
    zero_division flag.

    Raises:
        EmptyTestSet: the matrix counts no samples at all.
    """
    cm = np.asarray(cm)
    total = int(cm.sum())
    if total == 0:
        raise EmptyTestSet("confusion matrix is empty")
    per_class = []
    for k in range(cm.shape[0]):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        zero = False
        if tp + fp == 0:
            precision, zero = 0.0, True
        else:
            precision = tp / (tp + fp)
        if tp + fn == 0:
            recall, zero = 0.0, True
        else:
            recall = tp / (tp + fn)
        if precision + recall == 0.0:
            f1, zero = 0.0, True
        else:
            f1 = 2.0 * precision * recall / (precision + recall)
        per_class.append(ClassMetrics(precision=precision, recall=recall, f1=f1,
                                      support=tp + fn, zero_division=zero))
    return Metrics(
        accuracy=float(np.trace(cm)) / total,
        macro_precision=float(np.mean([c.precision for c in per_class])),
        macro_recall=float(np.mean([c.recall for c in per_class])),
        macro_f1=float(np.mean([c.f1 for c in per_class])),
        per_class=tuple(per_class),
    )


def evaluate(net: Network, x: np.ndarray, y: np.ndarray,
             n_classes: int) -> tuple[np.ndarray, Metrics]:
    """Predict a test set and summarize it.

    Raises:
        EmptyTestSet: no samples to evaluate.
    """
    if len(x) == 0:
        raise EmptyTestSet("evaluation set has no samples")
    preds = np.concatenate([
        net.predict(x[k:k + EVAL_BATCH]) for k in range(0, len(x), EVAL_BATCH)
    ])
    cm = confusion_matrix(y, preds, n_classes)
    return cm, metrics_from_confusion(cm)
