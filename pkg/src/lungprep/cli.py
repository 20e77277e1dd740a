"""Command-line pipeline driver.

Subcommands cover the whole flow: synth -> preprocess -> features ->
split -> train-gbm -> predict -> ensemble -> evaluate. Exit codes are
uniform: 0 success, 2 bad invocation, 3 bad input data, 4 unexpected
internal failure. stdout carries only machine-readable key=value
summaries; diagnostics go to stderr at a verbosity picked by
LUNGPREP_LOG={quiet,info,debug} (default quiet). Reruns over identical
inputs write identical bytes, and --jobs parallelism never changes any
output byte (results are sorted by image_id before writing).
"""

import argparse
import csv
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from lungprep import evaluation
from lungprep.dataset_manifest import (
    VALID_LABELS,
    class_counts,
    parse_manifest,
    split_by_patient,
    write_manifest,
)
from lungprep.ensemble import (
    EnsembleConfig,
    combine_batch,
    read_ensemble,
    read_prediction_file,
    write_ensemble,
    write_predictions,
)
from lungprep.errors import InputDataError, LungprepError, UsageError
from lungprep.feature_extraction import (
    CLASSIC_V1,
    classical_features,
    load_embeddings,
    write_features,
)
from lungprep.gbm import TrainConfig, fit_gbm, load_model, predict_label, save_model
from lungprep.image_core import load_image
from lungprep.lung_segmentation import (
    LOG_FIELDS,
    PreprocessedRecord,
    SelectionConfig,
    log_row,
    preprocess_image,
    save_record_rasters,
)
from lungprep.synth import write_synth_dataset

log = logging.getLogger(__name__)

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    name = os.environ.get("LUNGPREP_LOG", "quiet") or "quiet"
    if name not in _LOG_LEVELS:
        raise UsageError(
            f"LUNGPREP_LOG must be one of {', '.join(_LOG_LEVELS)}; got {name!r}"
        )
    logging.basicConfig(
        stream=sys.stderr,
        level=_LOG_LEVELS[name],
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _manifest_entries(manifest_path):
    """(image_id, absolute path, row) per manifest row.

    image_id is the path stem, which doubles as the raster/feature join
    key, so stems must be unique even when full paths already are.
    """
    manifest_path = Path(manifest_path)
    rows = parse_manifest(manifest_path)
    base = manifest_path.parent
    out = []
    seen = {}
    for row in rows:
        image_id = Path(row.image_path).stem
        if image_id in seen:
            raise InputDataError(
                f"manifest rows {seen[image_id]!r} and {row.image_path!r} "
                f"share image id {image_id!r}"
            )
        seen[image_id] = row.image_path
        out.append((image_id, base / row.image_path, row))
    return out


def _split_classes(text: str) -> tuple:
    classes = tuple(tok.strip() for tok in text.split(","))
    if any(not tok for tok in classes):
        raise UsageError(f"empty class name in {text!r}")
    return classes


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def _preprocess_one(task) -> tuple:
    """Run one manifest row; returns (image_id, status, log cells).

    status is selected/rejected/failed. Data-level exceptions demote the
    image to a failed log row so the batch continues; anything else is a
    bug and propagates. Stays module-level so worker pools can pickle it.
    """
    image_id, path_str, out_dir, threshold, fraction, sigma, dilate_iters = task
    selection = SelectionConfig(
        intensity_threshold=threshold, min_dark_fraction=fraction
    )
    try:
        raw = load_image(path_str)
        rec = preprocess_image(raw, image_id, selection, sigma, dilate_iters)
        save_record_rasters(rec, out_dir)
    except (LungprepError, OSError) as exc:
        failed = PreprocessedRecord(
            image_id=image_id, selected=False, dark_fraction=0.0, reason=str(exc)
        )
        return image_id, "failed", log_row(failed)
    return image_id, "selected" if rec.selected else "rejected", log_row(rec)


def cmd_preprocess(args) -> int:
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
    # validate selection knobs before any work
    SelectionConfig(
        intensity_threshold=args.select_threshold,
        min_dark_fraction=args.select_fraction,
    )
    entries = _manifest_entries(args.manifest)
    if not entries:
        raise InputDataError("no rows in manifest")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (
            image_id,
            str(path),
            str(out_dir),
            args.select_threshold,
            args.select_fraction,
            args.sigma,
            args.dilate_iters,
        )
        for image_id, path, _ in entries
    ]
    log.info("preprocessing %d images with %d job(s)", len(tasks), args.jobs)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_preprocess_one, tasks))
    else:
        results = [_preprocess_one(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    counts = {"selected": 0, "rejected": 0, "failed": 0}
    with open(out_dir / "preprocess_log.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_FIELDS)
        for image_id, status, cells in results:
            counts[status] += 1
            writer.writerow(cells)
            if status == "failed":
                log.warning("%s failed: %s", image_id, cells[-1])
    if counts["failed"] == len(results):
        raise InputDataError("all images failed preprocessing")
    print(
        f"selected={counts['selected']} rejected={counts['rejected']} "
        f"failed={counts['failed']}"
    )
    return 0


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def _selected_ids(pre_dir: Path) -> list:
    log_path = pre_dir / "preprocess_log.csv"
    try:
        lines = log_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputDataError(f"{log_path}: unreadable preprocess log: {exc}") from exc
    rows = list(csv.reader(lines))
    if not rows or tuple(rows[0]) != LOG_FIELDS:
        raise InputDataError(f"{log_path}: not a preprocess log")
    return [row[0] for row in rows[1:] if row and row[1] == "true"]


def cmd_features(args) -> int:
    if args.embeddings:
        vectors = load_embeddings(args.embeddings)
        if not vectors:
            raise InputDataError(f"{args.embeddings}: no feature rows")
        write_features(vectors, args.out)
        print(f"written={len(vectors)}")
        return 0
    pre_dir = Path(args.preprocess_dir)
    vectors = []
    for image_id in _selected_ids(pre_dir):
        gray_u8 = load_image(pre_dir / f"{image_id}_gray.pgm")
        mask_u8 = load_image(pre_dir / f"{image_id}_mask.pgm")
        gray = gray_u8.astype(np.float64) / 255.0
        vectors.append(classical_features(gray, mask_u8 > 0, image_id))
    write_features(vectors, args.out, schema=CLASSIC_V1)
    print(f"written={len(vectors)}")
    return 0


# ---------------------------------------------------------------------------
# train-gbm / predict
# ---------------------------------------------------------------------------

def cmd_train_gbm(args) -> int:
    class_list = _split_classes(args.classes)
    for c in class_list:
        if c not in VALID_LABELS:
            raise UsageError(f"unknown class {c!r} (must be among {VALID_LABELS})")
    cfg = TrainConfig(
        class_list=class_list,
        rounds=args.rounds,
        learning_rate=args.lr,
        max_depth=args.depth,
        min_leaf=args.min_leaf,
    )
    label_by_id = {image_id: row.label for image_id, _, row in _manifest_entries(args.manifest)}
    feats = []
    labels = []
    for fv in load_embeddings(args.features):
        if fv.image_id not in label_by_id:
            raise InputDataError(f"feature row {fv.image_id!r} missing from manifest")
        lab = label_by_id[fv.image_id]
        if lab in class_list:
            feats.append(fv)
            labels.append(lab)
    if len(feats) < 2:
        raise InputDataError(
            f"only {len(feats)} feature rows carry labels in {','.join(class_list)}"
        )
    log.info("training on %d rows, classes %s", len(feats), ",".join(class_list))
    model = fit_gbm(feats, labels, cfg)
    save_model(model, args.model)
    for r, loss in enumerate(model.per_round_loss, start=1):
        print(f"round={r} loss={loss:.6f}")
    return 0


def cmd_predict(args) -> int:
    if not args.model_id or not all(c.isalnum() or c in "._-" for c in args.model_id):
        raise UsageError(
            f"--model-id must be nonempty alphanumeric/._- text, got {args.model_id!r}"
        )
    model = load_model(args.model)
    rows = []
    for fv in load_embeddings(args.features):
        label, confidence = predict_label(model, fv)
        rows.append((fv.image_id, label, confidence))
    write_predictions(args.out, args.model_id, model.class_list, rows)
    print(f"predictions={len(rows)}")
    return 0


# ---------------------------------------------------------------------------
# ensemble / evaluate
# ---------------------------------------------------------------------------

def cmd_ensemble(args) -> int:
    if not 1 <= len(args.preds) <= 3:
        raise UsageError(f"--preds takes 1-3 files, got {len(args.preds)}")
    files = [read_prediction_file(p) for p in args.preds]
    model_ids = [model_id for model_id, _ in files]
    if len(set(model_ids)) != len(model_ids):
        raise UsageError(f"duplicate model ids across prediction files: {sorted(model_ids)}")
    weights = {}
    if args.weights is not None:
        parts = args.weights.split(",")
        if len(parts) != len(files):
            raise UsageError(
                f"--weights lists {len(parts)} values for {len(files)} prediction files"
            )
        for (model_id, _), tok in zip(files, parts):
            try:
                weights[model_id] = float(tok)
            except ValueError as exc:
                raise UsageError(f"bad weight {tok!r}") from exc
    cfg = EnsembleConfig(weights=weights, tie_order=_split_classes(args.tie_order))
    rows = combine_batch([preds for _, preds in files], cfg)
    write_ensemble(args.out, rows)
    print(f"combined={len(rows)}")
    return 0


def _read_eval_predictions(path) -> list:
    """(image_id, label) rows from either a per-model or a fused CSV."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("# model:"):
        _, preds = read_prediction_file(path)
        return [(p.image_id, p.label) for p in preds]
    return [(image_id, label) for image_id, label, _ in read_ensemble(path)]


def cmd_evaluate(args) -> int:
    label_by_id = {image_id: row.label for image_id, _, row in _manifest_entries(args.manifest)}
    pred_labels = []
    true_labels = []
    for image_id, label in _read_eval_predictions(args.preds):
        if image_id not in label_by_id:
            raise InputDataError(f"prediction id {image_id!r} missing from manifest")
        pred_labels.append(label)
        true_labels.append(label_by_id[image_id])
    if not pred_labels:
        raise InputDataError(f"{args.preds}: no prediction rows")
    cm = evaluation.accumulate(pred_labels, true_labels)
    report = evaluation.metrics(cm)
    evaluation.write_report(report, cm, args.report)
    print(f"accuracy={report.accuracy:.4f}")
    return 0


# ---------------------------------------------------------------------------
# split / synth
# ---------------------------------------------------------------------------

def _relocate(rel_path: str, old_base: Path, new_base: Path) -> str:
    if old_base == new_base:
        return rel_path
    return os.path.relpath(old_base / rel_path, new_base).replace(os.sep, "/")


def cmd_split(args) -> int:
    manifest_path = Path(args.manifest)
    rows = parse_manifest(manifest_path)
    train, test = split_by_patient(rows, args.test_fraction, args.seed)
    base = manifest_path.parent.resolve()
    for side_rows, out_path in ((train, args.out_train), (test, args.out_test)):
        out_base = Path(out_path).parent.resolve()
        write_manifest(
            [
                dataclasses.replace(r, image_path=_relocate(r.image_path, base, out_base))
                for r in side_rows
            ],
            out_path,
        )
    for name, side_rows in (("train", train), ("test", test)):
        per_class = " ".join(f"{c}={n}" for c, n in class_counts(side_rows).items())
        print(f"{name}={len(side_rows)} {per_class}")
    return 0


def cmd_synth(args) -> int:
    rows = write_synth_dataset(
        args.out_dir, per_class=args.per_class, seed=args.seed, size=args.size
    )
    print(f"images={len(rows)}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lungprep",
        description="Lung CT preprocessing, boosted-tree training, and evaluation pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="normalize, select, filter, and crop manifest images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--select-threshold", type=int, default=200)
    p.add_argument("--select-fraction", type=float, default=0.40)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--dilate-iters", type=int, default=2)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="compute classical features or validate embeddings")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preprocess-dir")
    src.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-gbm", help="fit a boosted-tree classifier on labeled features")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--classes", default="CP,N")
    p.set_defaults(func=cmd_train_gbm)

    p = sub.add_parser("predict", help="score features with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model-id", default="gbm")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ensemble", help="fuse 1-3 prediction files by weighted voting")
    p.add_argument("--preds", nargs="+", required=True)
    p.add_argument("--weights")
    p.add_argument("--tie-order", default="CP,CI,N")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score predictions against manifest labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="patient-wise train/test manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate a labeled phantom dataset with manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--per-class", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=512)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    try:
        _configure_logging()
        parser = _build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            code = exc.code
            if code is None:
                return 0
            return code if isinstance(code, int) else 2
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LungprepError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # the CLI boundary turns bugs into exit 4
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
