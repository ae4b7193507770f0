"""Confusion matrices and the metrics derived from them.

Which label counts as "positive" is always passed explicitly. The CLI
defaults to *policies without claims* (label 0), the majority class.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import knn, logreg

CLAIMS = 1
NO_CLAIMS = 0
CLASS_NAMES = {"claims": CLAIMS, "no-claims": NO_CLAIMS}


class _Undefined:
    """Marker for a metric whose denominator is zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


def resolve_class(positive_class) -> int:
    if isinstance(positive_class, str):
        try:
            return CLASS_NAMES[positive_class]
        except KeyError:
            raise ValueError(f"positive class must be one of {sorted(CLASS_NAMES)}") from None
    if positive_class not in (0, 1):
        raise ValueError("positive class must be 0 or 1")
    return int(positive_class)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int
    positive_class: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same counts read with the other label as positive."""
        return ConfusionMatrix(self.tn, self.fp, self.fn, self.tp, 1 - self.positive_class)

    def to_dict(self):
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn, "positive_class": self.positive_class}


def confusion_matrix(actual, predicted, positive_class) -> ConfusionMatrix:
    actual = np.asarray(actual)
    predicted = np.asarray(predicted)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {actual.shape} vs {predicted.shape}")
    if len(actual) == 0:
        raise ValueError("cannot build a confusion matrix from zero rows")
    pos = resolve_class(positive_class)
    a = actual == pos
    p = predicted == pos
    return ConfusionMatrix(
        tp=int(np.sum(a & p)),
        fn=int(np.sum(a & ~p)),
        fp=int(np.sum(~a & p)),
        tn=int(np.sum(~a & ~p)),
        positive_class=pos,
    )


def precision(cm: ConfusionMatrix):
    den = cm.tp + cm.fp
    return cm.tp / den if den else UNDEFINED


def recall(cm: ConfusionMatrix):
    den = cm.tp + cm.fn
    return cm.tp / den if den else UNDEFINED


def accuracy(cm: ConfusionMatrix):
    return (cm.tp + cm.tn) / cm.total if cm.total else UNDEFINED


def _json_value(v):
    return None if v is UNDEFINED else v


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: object
    recall: object
    matrix: ConfusionMatrix
    model: str

    def to_dict(self):
        return {
            "model": self.model,
            "accuracy": _json_value(self.accuracy),
            "precision": _json_value(self.precision),
            "recall": _json_value(self.recall),
            "confusion": self.matrix.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        """Plain-text rendering: the 2x2 matrix with actual classes as rows."""
        names = {CLAIMS: "With claims", NO_CLAIMS: "Without claims"}
        pos = self.matrix.positive_class
        neg = 1 - pos
        cm = self.matrix

        def fmt(v):
            return "undefined" if v is UNDEFINED else f"{v:.4f}"

        w = 16
        corner = "actual \\ predicted"
        lines = [
            f"model: {self.model}",
            f"positive class: {names[pos]}",
            "",
            f"{corner:<20}{names[pos]:>{w}}{names[neg]:>{w}}",
            f"{names[pos]:<20}{'TP ' + format(cm.tp, ','):>{w}}{'FN ' + format(cm.fn, ','):>{w}}",
            f"{names[neg]:<20}{'FP ' + format(cm.fp, ','):>{w}}{'TN ' + format(cm.tn, ','):>{w}}",
            "",
            f"{'accuracy':<12}{fmt(self.accuracy)}",
            f"{'precision':<12}{fmt(self.precision)}",
            f"{'recall':<12}{fmt(self.recall)}",
        ]
        return "\n".join(lines)


def report(actual, predicted, positive_class, model: str = "") -> MetricsReport:
    cm = confusion_matrix(actual, predicted, positive_class)
    return MetricsReport(accuracy(cm), precision(cm), recall(cm), cm, model)


def describe(model) -> str:
    if isinstance(model, knn.KnnModel):
        m = model.metric
        metric = "chebyshev" if m.kind == "chebyshev" else f"minkowski(p={m.order:g})"
        return f"knn(k={model.k}, metric={metric}, weights={model.weighting})"
    if isinstance(model, logreg.LogregModel):
        return f"logreg(penalty={model.penalty}, lambda={model.lam:g})"
    return type(model).__name__


def evaluate(model, X, y, positive_class, threads: int = 1, threshold: float = 0.5) -> MetricsReport:
    """Predict ``X`` with a KNN or logistic model and score against ``y``.

    ``threshold`` is the probability cut-off for logistic models.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(X) == 0:
        raise ValueError("test set is empty")
    if isinstance(model, knn.KnnModel):
        predicted = knn.predict(X, model, threads=threads)
    elif isinstance(model, logreg.LogregModel):
        predicted = logreg.predict(X, model, threshold)
    else:
        raise TypeError(f"cannot evaluate {type(model).__name__}")
    return report(y, predicted, positive_class, describe(model))


def write_sweep_csv(rows, path, parameter: str = "k") -> None:
    """Rows of (parameter value, train accuracy, test accuracy)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([parameter, "train_accuracy", "test_accuracy"])
        for value, train_acc, test_acc in rows:
            writer.writerow([value, repr(float(train_acc)), repr(float(test_acc))])
