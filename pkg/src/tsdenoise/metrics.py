"""Classification metrics and directional-change event counting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BadParams, NonPositivePrice, SeriesTooShort, ShapeMismatch, UndefinedMetric
from .validation import as_float_vector, check_int_at_least, check_positive


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise BadParams(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion_from_predictions(y_true, y_pred) -> ConfusionMatrix:
    """Count a binary confusion matrix; labels must be 0/1."""
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.ndim != 1:
        raise ShapeMismatch(f"y_true {t.shape} and y_pred {p.shape} must be equal 1-D shapes")
    if t.size == 0:
        raise BadParams("empty prediction arrays")
    for arr, name in ((t, "y_true"), (p, "y_pred")):
        if not np.all(np.isin(arr, (0, 1))):
            raise BadParams(f"{name} must contain only 0 and 1")
    tp = int(np.sum((t == 1) & (p == 1)))
    tn = int(np.sum((t == 0) & (p == 0)))
    fp = int(np.sum((t == 0) & (p == 1)))
    fn = int(np.sum((t == 1) & (p == 0)))
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def f1_score(cm: ConfusionMatrix) -> float:
    """F1 = 2*precision*recall / (precision + recall).

    Returns 0.0 when tp == 0 but fp or fn is positive; raises UndefinedMetric
    when tp, fp and fn are all zero (no positive class anywhere).
    """
    if cm.tp == 0:
        if cm.fp == 0 and cm.fn == 0:
            raise UndefinedMetric("F1 undefined: no true, predicted, or actual positives")
        return 0.0
    precision = cm.tp / (cm.tp + cm.fp)
    recall = cm.tp / (cm.tp + cm.fn)
    return 2.0 * precision * recall / (precision + recall)


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; 0.0 by convention when a denominator factor is 0."""
    if not mcc_defined(cm):
        return 0.0
    num = cm.tp * cm.tn - cm.fp * cm.fn
    den = math.sqrt(float(cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn))
    return num / den


def mcc_defined(cm: ConfusionMatrix) -> bool:
    """False when the MCC denominator degenerates (reports carry this flag)."""
    return all((cm.tp + cm.fp, cm.tp + cm.fn, cm.tn + cm.fp, cm.tn + cm.fn))


@dataclass(frozen=True)
class DcReport:
    """Directional-change events for one price vector at one threshold."""

    threshold: float
    count: int
    indices: tuple


def dc_events(prices, threshold: float) -> DcReport:
    """Count confirmed directional-change events at a relative threshold.

    Starts undetermined with the first price as the reference extreme; an
    upward (downward) event is confirmed at the first index whose price is
    at least extreme*(1+threshold) (at most extreme*(1-threshold)); each
    confirmation flips the trend and resets the extreme to the confirming
    price; inside a trend the extreme tracks the running max (uptrend) or
    min (downtrend). Scale-invariant by construction.
    """
    x = as_float_vector(prices, "prices")
    check_positive(threshold, "threshold")
    if threshold >= 1:
        raise BadParams(f"threshold must be < 1, got {threshold}")
    if np.any(x <= 0):
        raise NonPositivePrice("dc_events needs strictly positive prices")
    if len(x) < 2:
        raise SeriesTooShort("dc_events needs at least 2 prices")

    extreme = x[0]
    mode = 0  # 0 undetermined, +1 uptrend, -1 downtrend
    indices: list[int] = []
    for i in range(1, len(x)):
        p = x[i]
        if mode >= 0 and p <= extreme * (1.0 - threshold):
            indices.append(i)
            mode = -1
            extreme = p
        elif mode <= 0 and p >= extreme * (1.0 + threshold):
            indices.append(i)
            mode = 1
            extreme = p
        elif mode == 1:
            extreme = max(extreme, p)
        elif mode == -1:
            extreme = min(extreme, p)
    return DcReport(threshold=float(threshold), count=len(indices), indices=tuple(indices))


def return_histogram(returns, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram over [min, max]; counts sum to len(returns)."""
    x = as_float_vector(returns, "returns")
    n_bins = check_int_at_least(n_bins, 1, "n_bins")
    counts, edges = np.histogram(x, bins=n_bins)
    return counts, edges
