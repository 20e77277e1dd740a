"""Confusion-matrix accumulation and derived classification metrics.

Matrix orientation: rows are the predicted (output) class, columns the
true (target) class. Row marginals are therefore precisions and column
marginals recalls. Any 0/0 metric is defined as 0.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lungprep.errors import InputDataError, UsageError

DEFAULT_CLASSES = ("CI", "CP", "N")


@dataclass
class ConfusionMatrix:
    """Square count grid: counts[predicted][true]."""

    class_list: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricsReport:
    """Accuracy plus per-class and aggregated precision/recall/F1.

    Per-class tuples align with class_list. Macro aggregates are
    unweighted means; weighted aggregates weight each class by its
    true-class support (weighted recall therefore equals accuracy).
    """

    class_list: tuple
    accuracy: float
    precision: tuple
    recall: tuple
    f1: tuple
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


def accumulate(pred_labels, true_labels, class_list=DEFAULT_CLASSES) -> ConfusionMatrix:
    """Tally aligned prediction/truth label lists into a confusion matrix."""
    pred_labels = list(pred_labels)
    true_labels = list(true_labels)
    if len(pred_labels) != len(true_labels):
        raise UsageError(
            f"length mismatch: {len(pred_labels)} predictions vs {len(true_labels)} truths"
        )
    class_list = tuple(class_list)
    index = {c: i for i, c in enumerate(class_list)}
    if len(index) != len(class_list):
        raise UsageError("class_list contains duplicates")
    counts = np.zeros((len(class_list), len(class_list)), dtype=np.int64)
    for pred, true in zip(pred_labels, true_labels):
        if pred not in index:
            raise InputDataError(f"unknown predicted label {pred!r}")
        if true not in index:
            raise InputDataError(f"unknown true label {true!r}")
        counts[index[pred], index[true]] += 1
    return ConfusionMatrix(class_list=class_list, counts=counts)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    """Elementwise sum of two matrices over the same class_list."""
    if a.class_list != b.class_list:
        raise UsageError("cannot merge matrices with different class lists")
    return ConfusionMatrix(class_list=a.class_list, counts=a.counts + b.counts)


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Derive accuracy, per-class precision/recall/F1, and aggregates."""
    total = cm.total
    if total < 1:
        raise UsageError("empty confusion matrix")
    counts = cm.counts
    k = len(cm.class_list)
    diag = np.diag(counts)
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    precision = tuple(_ratio(int(diag[i]), int(row_sums[i])) for i in range(k))
    recall = tuple(_ratio(int(diag[i]), int(col_sums[i])) for i in range(k))
    f1 = tuple(
        _ratio(2.0 * precision[i] * recall[i], precision[i] + recall[i]) for i in range(k)
    )
    support = tuple(int(col_sums[i]) for i in range(k))
    return MetricsReport(
        class_list=cm.class_list,
        accuracy=_ratio(int(diag.sum()), total),
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=sum(precision) / k,
        macro_recall=sum(recall) / k,
        macro_f1=sum(f1) / k,
        weighted_precision=sum(s * p for s, p in zip(support, precision)) / total,
        weighted_recall=sum(s * r for s, r in zip(support, recall)) / total,
        weighted_f1=sum(s * f for s, f in zip(support, f1)) / total,
    )


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}%"


def render_text(report: MetricsReport, cm: ConfusionMatrix) -> str:
    """Plain-text confusion grid with marginal percentages.

    Rows are predicted classes ending in the row precision; the bottom
    row carries per-column recalls and the overall accuracy in the corner.
    """
    classes = list(cm.class_list)
    # widest cell is a percentage like "100.0%" (6 chars); keep a 2-space gutter
    width = max(
        8,
        max(len(c) for c in classes) + 2,
        len(str(int(cm.counts.max()))) + 2,
    )

    def cell(text: str) -> str:
        return f"{text:>{width}}"

    lines = ["confusion matrix (rows: predicted, cols: true)", ""]
    lines.append(cell("") + "".join(cell(c) for c in classes) + cell("prec"))
    for i, c in enumerate(classes):
        row = cell(c) + "".join(cell(str(int(v))) for v in cm.counts[i])
        lines.append(row + cell(_pct(report.precision[i])))
    lines.append(
        cell("recall")
        + "".join(cell(_pct(report.recall[i])) for i in range(len(classes)))
        + cell(_pct(report.accuracy))
    )
    return "\n".join(lines) + "\n"


def _fmt4(x: float) -> str:
    return f"{x:.4f}"


def write_report(report: MetricsReport, cm: ConfusionMatrix, path) -> None:
    """Write metrics as JSON (4-decimal values, fixed key order) plus a
    text rendering of the grid at the same path with a .txt suffix."""
    path = Path(path)
    lines = ["{"]
    lines.append('  "class_list": [' + ", ".join(f'"{c}"' for c in cm.class_list) + "],")
    count_rows = ", ".join("[" + ", ".join(str(int(v)) for v in row) + "]" for row in cm.counts)
    lines.append(f'  "counts": [{count_rows}],')
    lines.append(f'  "accuracy": {_fmt4(report.accuracy)},')
    lines.append('  "per_class": {')
    for i, c in enumerate(cm.class_list):
        trailer = "," if i + 1 < len(cm.class_list) else ""
        lines.append(
            f'    "{c}": {{"precision": {_fmt4(report.precision[i])}, '
            f'"recall": {_fmt4(report.recall[i])}, "f1": {_fmt4(report.f1[i])}}}{trailer}'
        )
    lines.append("  },")
    lines.append(
        '  "macro": {"precision": %s, "recall": %s, "f1": %s},'
        % (_fmt4(report.macro_precision), _fmt4(report.macro_recall), _fmt4(report.macro_f1))
    )
    lines.append(
        '  "weighted": {"precision": %s, "recall": %s, "f1": %s}'
        % (
            _fmt4(report.weighted_precision),
            _fmt4(report.weighted_recall),
            _fmt4(report.weighted_f1),
        )
    )
    lines.append("}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    path.with_suffix(".txt").write_text(render_text(report, cm), encoding="utf-8")
