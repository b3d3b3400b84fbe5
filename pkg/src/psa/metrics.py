"""Confusion counts, per-class precision/recall/F-measure, accuracy, and
plain-text / JSON report rendering.

Per-class metrics treat each label in turn as the positive class; the AVG
row is the unweighted (macro) mean. Division-by-zero cases return 0 by
convention. Displayed values are rounded to two decimals (round-half-to-even
on the exact binary value); the JSON report keeps full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import LABELS, NEG, POS
from .errors import EmptyMatrix, LengthMismatch

REPORT_SCHEMA = "report/1"

_DISPLAY_NAMES = {NEG: "Negative", POS: "Positive"}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f_measure: float


@dataclass
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    macro: ClassMetrics
    accuracy: float
    confusion: dict[str, ConfusionMatrix]


def confusion(predictions: list[str], golds: list[str],
              positive_class: str) -> ConfusionMatrix:
    """Count TP/FP/FN/TN treating ``positive_class`` as positive."""
    if len(predictions) != len(golds):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(golds)} golds"
        )
    if not predictions:
        raise LengthMismatch("need at least one example")
    tp = fp = fn = tn = 0
    for pred, gold in zip(predictions, golds):
        if pred == positive_class:
            if gold == positive_class:
                tp += 1
            else:
                fp += 1
        else:
            if gold == positive_class:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def metrics(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """(precision, recall, f_measure, accuracy) from confusion counts."""
    if cm.total < 1:
        raise EmptyMatrix("confusion matrix has no examples")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else 0.0
    f_measure = (
        2 * (precision * recall) / (precision + recall)
        if precision + recall > 0 else 0.0
    )
    accuracy = (cm.tp + cm.tn) / cm.total
    return precision, recall, f_measure, accuracy


def evaluate_per_class(predictions: list[str], golds: list[str]) -> MetricsReport:
    """Per-class metrics with each label as positive in turn, plus macro
    averages and the single global accuracy."""
    per_class: dict[str, ClassMetrics] = {}
    cms: dict[str, ConfusionMatrix] = {}
    accuracy = 0.0
    for label in LABELS:
        cm = confusion(predictions, golds, label)
        p, r, f, accuracy = metrics(cm)
        per_class[label] = ClassMetrics(p, r, f)
        cms[label] = cm
    macro = ClassMetrics(
        sum(m.precision for m in per_class.values()) / len(per_class),
        sum(m.recall for m in per_class.values()) / len(per_class),
        sum(m.f_measure for m in per_class.values()) / len(per_class),
    )
    return MetricsReport(per_class, macro, accuracy, cms)


def _fmt2(value: float) -> str:
    return format(value, ".2f")


def render_report(named_reports: list[tuple[str, MetricsReport]]) -> str:
    """Render per-model blocks with Negative/Positive/AVG rows.

    Precision/recall/F-measure show two decimals; accuracy appears as a
    percentage on the AVG row only.
    """
    if not named_reports:
        raise ValueError("need at least one report")
    lines = []
    header = f"{'':10}{'Precision':>10}{'Recall':>10}{'F-measure':>10}{'Accuracy (%)':>14}"
    for name, report in named_reports:
        lines.append(name)
        lines.append(header)
        for label in LABELS:
            m = report.per_class[label]
            lines.append(
                f"{_DISPLAY_NAMES[label]:10}{_fmt2(m.precision):>10}"
                f"{_fmt2(m.recall):>10}{_fmt2(m.f_measure):>10}{'':>14}"
            )
        lines.append(
            f"{'AVG':10}{_fmt2(report.macro.precision):>10}"
            f"{_fmt2(report.macro.recall):>10}{_fmt2(report.macro.f_measure):>10}"
            f"{_fmt2(report.accuracy * 100):>14}"
        )
        lines.append("")
    return "\n".join(lines)


def report_json(named_reports: list[tuple[str, MetricsReport]]) -> str:
    """Machine-readable report with full-precision metrics and raw counts."""
    payload = {"schema": REPORT_SCHEMA, "models": []}
    for name, report in named_reports:
        payload["models"].append({
            "name": name,
            "accuracy": report.accuracy,
            "macro": {
                "precision": report.macro.precision,
                "recall": report.macro.recall,
                "f_measure": report.macro.f_measure,
            },
            "per_class": {
                label: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f_measure": m.f_measure,
                    "confusion": {
                        "tp": report.confusion[label].tp,
                        "fp": report.confusion[label].fp,
                        "fn": report.confusion[label].fn,
                        "tn": report.confusion[label].tn,
                    },
                }
                for label, m in report.per_class.items()
            },
        })
    return json.dumps(payload, indent=2, ensure_ascii=False)
