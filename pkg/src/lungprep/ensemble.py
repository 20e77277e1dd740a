"""Combine per-image predictions from up to three classifiers.

The fusion rule is confidence-weighted plurality: each model adds
weight * confidence to the class it voted for, the largest total wins,
and exact score ties resolve by a fixed class order. Weighted voting
subsumes plain majority voting (set every confidence to 1) and stays
deterministic for any input order.
"""

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

from lungprep.errors import FormatError, InputDataError, UsageError

KNOWN_CLASSES = ("CI", "CP", "N")

_HEADER_RE = re.compile(r"^# model: (\S+) classes: (\S+)$")
_PRED_COLUMNS = "image_id,label,confidence"


@dataclass(frozen=True)
class ModelPrediction:
    """One model's vote for one image."""

    model_id: str
    image_id: str
    supported_classes: tuple
    label: str
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "supported_classes", tuple(self.supported_classes))
        for c in self.supported_classes:
            if c not in KNOWN_CLASSES:
                raise InputDataError(f"unknown class {c!r} (expected subset of {KNOWN_CLASSES})")
        if self.label not in self.supported_classes:
            raise InputDataError(
                f"{self.model_id}/{self.image_id}: label {self.label!r} outside "
                f"declared classes {self.supported_classes}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise InputDataError(
                f"{self.model_id}/{self.image_id}: confidence {self.confidence} outside [0, 1]"
            )


@dataclass(frozen=True)
class EnsembleConfig:
    """Per-model weights (default 1.0) and the tie-breaking class order."""

    weights: dict = field(default_factory=dict)
    tie_order: tuple = ("CP", "CI", "N")

    def __post_init__(self):
        object.__setattr__(self, "weights", dict(self.weights))
        object.__setattr__(self, "tie_order", tuple(self.tie_order))
        for model_id, w in self.weights.items():
            if w < 0:
                raise UsageError(f"weight for {model_id!r} must be nonnegative")
        if len(set(self.tie_order)) != len(self.tie_order) or not self.tie_order:
            raise UsageError("tie_order must be a nonempty list of distinct classes")


def combine(preds, cfg: EnsembleConfig = EnsembleConfig()) -> tuple:
    """Fuse 1-3 predictions for one image into (label, normalized score).

    Only models with positive effective weight vote; score(c) sums
    weight * confidence over the models voting c (in model_id order, so
    input order never matters), the winner is the argmax with exact ties
    resolved by tie_order, and the returned score is the winning share of
    the total. An all-zero score vector resolves purely by tie_order among
    the voted classes, with score 0.
    """
    preds = list(preds)
    if not 1 <= len(preds) <= 3:
        raise UsageError(f"combine expects 1-3 predictions, got {len(preds)}")
    ids = [p.model_id for p in preds]
    if len(set(ids)) != len(ids):
        raise UsageError(f"duplicate model_id among predictions: {sorted(ids)}")
    image_ids = {p.image_id for p in preds}
    if len(image_ids) != 1:
        raise UsageError(f"mismatched image_ids in one combine call: {sorted(image_ids)}")
    votes = [p for p in preds if cfg.weights.get(p.model_id, 1.0) > 0.0]
    if not votes:
        raise UsageError("all participating models have weight 0")
    terms = {}
    for p in votes:
        terms.setdefault(p.label, []).append((p.model_id, cfg.weights.get(p.model_id, 1.0) * p.confidence))
    scores = {}
    for label, contribs in terms.items():
        if label not in cfg.tie_order:
            raise UsageError(f"voted class {label!r} missing from tie_order {cfg.tie_order}")
        total = 0.0
        for _, value in sorted(contribs):
            total += value
        scores[label] = total
    winner = None
    best = -1.0
    for c in cfg.tie_order:
        if c in scores and scores[c] > best:
            winner = c
            best = scores[c]
    denom = 0.0
    for c in cfg.tie_order:
        if c in scores:
            denom += scores[c]
    return winner, (best / denom if denom > 0.0 else 0.0)


def combine_batch(prediction_lists, cfg: EnsembleConfig = EnsembleConfig()) -> list:
    """Fuse several models' prediction lists into (image_id, label, score) rows.

    Rows join on image_id; an image missing from one model's list simply
    gets no vote from that model. Output is sorted by image_id.
    """
    by_image = {}
    for preds in prediction_lists:
        for p in preds:
            by_image.setdefault(p.image_id, []).append(p)
    out = []
    for image_id in sorted(by_image):
        label, score = combine(by_image[image_id], cfg)
        out.append((image_id, label, score))
    return out


def read_predictions(path) -> list:
    """Parse a prediction CSV produced by write_predictions.

    Layout: "# model: <id> classes: <c1,c2,...>", then the column header,
    then one row per image. Every row is validated against the declared
    class support; duplicate image_ids are rejected.
    """
    _, preds = read_prediction_file(path)
    return preds


def read_prediction_file(path) -> tuple:
    """read_predictions plus the file's model_id (useful for empty files)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"{path}: unreadable file: {exc}") from exc
    if not lines:
        raise FormatError(f"{path}: empty prediction file")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise FormatError(f"{path}: first line must be '# model: <id> classes: <list>'")
    model_id = m.group(1)
    classes = tuple(m.group(2).split(","))
    if len(lines) < 2 or lines[1] != _PRED_COLUMNS:
        raise FormatError(f"{path}: second line must be '{_PRED_COLUMNS}'")
    preds = []
    seen = set()
    for ln, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"{path}:{ln}: expected 3 cells, got {len(row)}")
        image_id, label, conf_text = row
        if image_id in seen:
            raise InputDataError(f"{path}:{ln}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        try:
            confidence = float(conf_text)
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: bad confidence {conf_text!r}") from exc
        preds.append(
            ModelPrediction(
                model_id=model_id,
                image_id=image_id,
                supported_classes=classes,
                label=label,
                confidence=confidence,
            )
        )
    return model_id, preds


def write_predictions(path, model_id: str, classes, rows) -> None:
    """Write (image_id, label, confidence) rows as a prediction CSV.

    Rows are sorted by image_id and confidences rendered at 6 decimals;
    reruns over identical inputs give identical bytes.
    """
    classes = tuple(classes)
    rows = sorted(rows)
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise InputDataError("duplicate image_id among predictions")
    lines = [f"# model: {model_id} classes: {','.join(classes)}", _PRED_COLUMNS]
    for image_id, label, confidence in rows:
        if label not in classes:
            raise UsageError(f"{image_id}: label {label!r} outside classes {classes}")
        if any(ch in image_id for ch in ",\r\n\""):
            raise UsageError(f"image_id {image_id!r} contains CSV delimiter characters")
        lines.append(f"{image_id},{label},{confidence:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_ensemble(path, rows) -> None:
    """Write fused (image_id, label, score) rows: header then sorted rows."""
    lines = ["image_id,label,score"]
    for image_id, label, score in sorted(rows):
        lines.append(f"{image_id},{label},{score:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ensemble(path) -> list:
    """Parse a fused CSV back into (image_id, label, score) rows."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"{path}: unreadable file: {exc}") from exc
    if not lines or lines[0] != "image_id,label,score":
        raise FormatError(f"{path}: first line must be 'image_id,label,score'")
    rows = []
    seen = set()
    for ln, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"{path}:{ln}: expected 3 cells, got {len(row)}")
        image_id, label, score_text = row
        if image_id in seen:
            raise InputDataError(f"{path}:{ln}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        try:
            score = float(score_text)
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: bad score {score_text!r}") from exc
        rows.append((image_id, label, score))
    return rows
