"""Confusion accounting, detection rates, ROC construction, and AUC.

The positive class is "attack" throughout, and classification uses the same
strict inequality as the detector: a request is predicted positive when its
score is strictly greater than the threshold.

All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Rates:
    tpr: float
    fpr: float
    precision: float
    recall: float
    degenerate: frozenset[str]  # metrics whose denominator was zero


def rates(c: ConfusionCounts) -> Rates:
    """TPR, FPR, precision, recall; zero denominators yield 0 and are flagged."""
    degenerate = set()

    def ratio(num: int, den: int, metric: str) -> float:
        if den == 0:
            degenerate.add(metric)
            return 0.0
        return num / den

    tpr = ratio(c.tp, c.tp + c.fn, "tpr")
    fpr = ratio(c.fp, c.fp + c.tn, "fpr")
    precision = ratio(c.tp, c.tp + c.fp, "precision")
    if "tpr" in degenerate:
        degenerate.add("recall")
    return Rates(tpr=tpr, fpr=fpr, precision=precision, recall=tpr,
                 degenerate=frozenset(degenerate))


def confusion_from_scores(scores: Sequence[float], is_attack: Sequence[bool],
                          threshold: float) -> ConfusionCounts:
    """Tally verdicts at one threshold: positive iff score > threshold."""
    tp = fp = tn = fn = 0
    for score, attack in zip(scores, is_attack):
        positive = score > threshold
        if attack and positive:
            tp += 1
        elif attack:
            fn += 1
        elif positive:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class RocCurve:
    """Operating points from (0, 0) to (1, 1), fpr and tpr non-decreasing."""

    points: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]


def roc_curve(scores: Sequence[float], is_attack: Sequence[bool]) -> RocCurve:
    """Threshold sweep over the distinct scores, highest first.

    Each threshold t yields the operating point of the rule "score > t",
    starting from the all-negative sentinel at +inf; tied scores share one
    point, and the curve is closed with the all-positive point (1, 1) at
    -inf.
    """
    if len(scores) != len(is_attack) or not scores:
        raise ValueError("scores and labels must be equal-length and non-empty")
    n_pos = sum(1 for a in is_attack if a)
    n_neg = len(is_attack) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both attack and benign labels are required")

    sweep = [math.inf] + sorted(set(float(s) for s in scores), reverse=True)
    points: list[tuple[float, float]] = []
    thresholds: list[float] = []
    for t in sweep:
        tp = sum(1 for s, a in zip(scores, is_attack) if a and s > t)
        fp = sum(1 for s, a in zip(scores, is_attack) if not a and s > t)
        point = (fp / n_neg, tp / n_pos)
        if points and points[-1] == point:
            continue
        points.append(point)
        thresholds.append(t)
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
        thresholds.append(-math.inf)
    return RocCurve(points=tuple(points), thresholds=tuple(thresholds))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the operating points."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(curve.points, curve.points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def roc_csv(curve: RocCurve) -> str:
    """CSV rows "threshold,fpr,tpr" in 6-decimal fixed notation."""
    lines = ["threshold,fpr,tpr"]
    for t, (fpr, tpr) in zip(curve.thresholds, curve.points):
        t_text = f"{t:.6f}" if math.isfinite(t) else ("inf" if t > 0 else "-inf")
        lines.append(f"{t_text},{fpr:.6f},{tpr:.6f}")
    return "\n".join(lines) + "\n"
