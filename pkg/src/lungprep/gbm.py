"""From-scratch gradient-boosted regression trees with logistic loss.

Binary problems train a single forest predicting the log-odds of the
SECOND class in class_list; k-class problems train one such forest per
class (one-vs-rest). Each round fits a regression tree to the logistic
residuals with Newton leaf values:

    residual  g_i = y_i - p_i
    hessian   h_i = p_i * (1 - p_i)
    gain      GL^2/HL + GR^2/HR - (GL+GR)^2/(HL+HR)
    leaf      G / H            (learning_rate applied where trees are summed)

Split candidates are the midpoints between consecutive distinct sorted
feature values; gain ties break toward the lowest feature index, then the
lowest threshold. Training is a pure function of (data, config): there is
no subsampling and no randomness, and example order does not affect the
fitted predictions (per-node sorting canonicalizes every reduction).
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lungprep import _kernels
from lungprep.errors import FormatError, InputDataError, SchemaMismatchError, UsageError

MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters plus the ordered label list."""

    class_list: tuple
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 5

    def __post_init__(self):
        object.__setattr__(self, "class_list", tuple(self.class_list))
        if len(self.class_list) < 2:
            raise UsageError("class_list needs at least 2 classes")
        if len(set(self.class_list)) != len(self.class_list):
            raise UsageError("class_list contains duplicates")
        if self.rounds < 1:
            raise UsageError("rounds must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise UsageError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise UsageError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise UsageError("min_leaf must be >= 1")


@dataclass
class TreeNode:
    """Regression-tree node: a leaf value or a split routing x[feature] <= threshold left."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class GbmModel:
    """A trained boosted forest per class plus its logistic link metadata.

    init_scores and forests are aligned: one entry for binary models (the
    positive class is class_list[1]), one per class for one-vs-rest.
    """

    schema_id: str
    class_list: tuple
    init_scores: tuple
    learning_rate: float
    forests: tuple
    per_round_loss: tuple


def _sigmoid_vec(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _sigmoid(m: float) -> float:
    if m >= 0:
        return 1.0 / (1.0 + math.exp(-m))
    e = math.exp(m)
    return e / (1.0 + e)


def _mean_logloss(margins: np.ndarray, y: np.ndarray) -> float:
    # softplus(m) - y*m is the numerically stable form of the logistic loss
    return float(np.mean(np.logaddexp(0.0, margins) - y * margins))


def _leaf_stats(g: np.ndarray, h: np.ndarray) -> float:
    # fsum makes leaf values exact, hence independent of example order
    gs = math.fsum(g)
    hs = math.fsum(h)
    return gs / hs if hs > 0.0 else 0.0


def _build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: TrainConfig, contrib: np.ndarray):
    """Greedily grow one regression tree; returns None if the root cannot split.

    contrib receives each training example's leaf value, so the caller can
    update margins without re-traversing the tree.
    """
    n_features = X.shape[1]

    def leaf(idx: np.ndarray) -> TreeNode:
        v = _leaf_stats(g[idx], h[idx])
        contrib[idx] = v
        return TreeNode(value=v)

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        if depth >= cfg.max_depth or idx.size < 2 * cfg.min_leaf:
            return leaf(idx)
        node_g = g[idx]
        node_h = h[idx]
        best_gain = 0.0
        best_feature = -1
        best_threshold = 0.0
        for f in range(n_features):
            col = X[idx, f]
            # sort by value, then by gradient: examples tied on both are
            # interchangeable, so prefix sums no longer depend on input order
            order = np.lexsort((node_g, col))
            gain, threshold, _ = _kernels.scan_split(
                np.ascontiguousarray(col[order]),
                np.ascontiguousarray(node_g[order]),
                np.ascontiguousarray(node_h[order]),
                cfg.min_leaf,
            )
            if gain > best_gain:
                best_gain = gain
                best_feature = f
                best_threshold = threshold
        if best_feature < 0:
            return leaf(idx)
        sel = X[idx, best_feature] <= best_threshold
        return TreeNode(
            feature=best_feature,
            threshold=best_threshold,
            left=grow(idx[sel], depth + 1),
            right=grow(idx[~sel], depth + 1),
        )

    root = grow(np.arange(X.shape[0]), 0)
    if root.is_leaf:
        return None
    return root


def _eval_tree(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value


def _fit_binary(X: np.ndarray, y: np.ndarray, cfg: TrainConfig):
    p_pos = float(y.mean())
    init = math.log(p_pos / (1.0 - p_pos))
    margins = np.full(y.shape[0], init, dtype=np.float64)
    init_loss = _mean_logloss(margins, y)
    contrib = np.empty(y.shape[0], dtype=np.float64)
    trees = []
    losses = []
    for _ in range(cfg.rounds):
        p = _sigmoid_vec(margins)
        g = y - p
        h = p * (1.0 - p)
        tree = _build_tree(X, g, h, cfg, contrib)
        if tree is None:
            # identical margins would stall every later round the same way
            break
        margins = margins + cfg.learning_rate * contrib
        trees.append(tree)
        losses.append(_mean_logloss(margins, y))
    return trees, losses, init, init_loss


def fit_gbm(features, labels, cfg: TrainConfig) -> GbmModel:
    """Train a boosted model on feature vectors with string labels.

    Binary configs produce one forest for class_list[1]; larger configs
    train one one-vs-rest forest per class, and per_round_loss sums the
    per-class losses round by round (a class that stops splitting early
    contributes its final loss to later rounds).
    """
    features = list(features)
    labels = list(labels)
    if len(features) != len(labels):
        raise UsageError("features and labels lengths differ")
    if len(features) < 2:
        raise UsageError("need at least 2 training examples")
    schema_id = features[0].schema_id
    dim = features[0].values.size
    for fv in features:
        if fv.schema_id != schema_id or fv.values.size != dim:
            raise SchemaMismatchError(
                f"{fv.image_id}: schema {fv.schema_id} does not match {schema_id}"
            )
    present = set(labels)
    if len(present) < 2:
        raise InputDataError("single-class input")
    for lab in labels:
        if lab not in cfg.class_list:
            raise InputDataError(f"label {lab!r} not in class_list {cfg.class_list}")
    for c in cfg.class_list:
        if c not in present:
            raise InputDataError(f"class {c!r} absent from training data")

    X = np.ascontiguousarray(np.stack([fv.values for fv in features]))
    label_arr = np.array(labels)

    if len(cfg.class_list) == 2:
        y = (label_arr == cfg.class_list[1]).astype(np.float64)
        trees, losses, init, _ = _fit_binary(X, y, cfg)
        return GbmModel(
            schema_id=schema_id,
            class_list=cfg.class_list,
            init_scores=(init,),
            learning_rate=cfg.learning_rate,
            forests=(tuple(trees),),
            per_round_loss=tuple(losses),
        )

    forests = []
    inits = []
    all_losses = []
    init_losses = []
    for c in cfg.class_list:
        y = (label_arr == c).astype(np.float64)
        trees, losses, init, init_loss = _fit_binary(X, y, cfg)
        forests.append(tuple(trees))
        inits.append(init)
        all_losses.append(losses)
        init_losses.append(init_loss)
    max_rounds = max(len(ls) for ls in all_losses)
    combined = []
    for r in range(max_rounds):
        # classes whose forest stalled early hold their last (or init) loss
        total = 0.0
        for ls, init_loss in zip(all_losses, init_losses):
            total += ls[min(r, len(ls) - 1)] if ls else init_loss
        combined.append(total)
    return GbmModel(
        schema_id=schema_id,
        class_list=cfg.class_list,
        init_scores=tuple(inits),
        learning_rate=cfg.learning_rate,
        forests=tuple(forests),
        per_round_loss=tuple(combined),
    )


def _check_schema(model: GbmModel, fv) -> None:
    if fv.schema_id != model.schema_id:
        raise SchemaMismatchError(
            f"{fv.image_id}: schema {fv.schema_id} does not match model schema {model.schema_id}"
        )


def predict_margin(model: GbmModel, fv) -> np.ndarray:
    """Per-class margin scores: init_c + learning_rate * sum of tree outputs.

    Binary models return [-m, +m] aligned with class_list, where m is the
    positive-class (class_list[1]) margin.
    """
    _check_schema(model, fv)
    x = fv.values
    raw = []
    for init, forest in zip(model.init_scores, model.forests):
        s = 0.0
        for tree in forest:
            s += _eval_tree(tree, x)
        raw.append(init + model.learning_rate * s)
    if len(model.class_list) == 2:
        return np.array([-raw[0], raw[0]])
    return np.array(raw)


def predict_label(model: GbmModel, fv) -> tuple:
    """Predicted label with a confidence in [0, 1].

    Binary: sigmoid of the positive margin with a >= 0.5 cutoff, so the
    two class confidences sum to 1 exactly. Multiclass: the class with the
    largest one-vs-rest margin (equivalently probability; exact ties break
    by class_list order), confidence normalized by the sum of the class
    probabilities.
    """
    _check_schema(model, fv)
    margins = predict_margin(model, fv)
    if len(model.class_list) == 2:
        p_pos = _sigmoid(float(margins[1]))
        if p_pos >= 0.5:
            return model.class_list[1], p_pos
        return model.class_list[0], 1.0 - p_pos
    i = int(np.argmax(margins))
    probs = _sigmoid_vec(margins)
    total = float(probs.sum())
    confidence = float(probs[i]) / total if total > 0.0 else 0.0
    return model.class_list[i], confidence


# ---------------------------------------------------------------------------
# Canonical JSON persistence: fixed key order, floats at 17 significant
# digits (lossless for float64), no whitespace. Identical models always
# serialize to identical bytes.
# ---------------------------------------------------------------------------

def _emit(obj) -> str:
    if isinstance(obj, bool):
        raise UsageError("unexpected boolean in model serialization")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise UsageError("non-finite number in model serialization")
        return format(obj, ".17g")
    if isinstance(obj, dict):
        parts = (f"{json.dumps(k)}:{_emit(v)}" for k, v in obj.items())
        return "{" + ",".join(parts) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    raise UsageError(f"unserializable value of type {type(obj).__name__}")


def _tree_to_obj(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"leaf": float(node.value)}
    return {
        "feature": int(node.feature),
        "threshold": float(node.threshold),
        "left": _tree_to_obj(node.left),
        "right": _tree_to_obj(node.right),
    }


def _tree_from_obj(obj) -> TreeNode:
    if not isinstance(obj, dict):
        raise FormatError("malformed model file: tree node is not an object")
    if "leaf" in obj:
        v = obj["leaf"]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise FormatError("malformed model file: bad leaf value")
        return TreeNode(value=float(v))
    try:
        feature = obj["feature"]
        threshold = obj["threshold"]
        left = obj["left"]
        right = obj["right"]
    except KeyError as exc:
        raise FormatError("malformed model file: incomplete tree node") from exc
    if not isinstance(feature, int) or feature < 0:
        raise FormatError("malformed model file: bad feature index")
    if not isinstance(threshold, (int, float)) or isinstance(threshold, bool):
        raise FormatError("malformed model file: bad threshold")
    return TreeNode(
        feature=feature,
        threshold=float(threshold),
        left=_tree_from_obj(left),
        right=_tree_from_obj(right),
    )


def save_model(model: GbmModel, path) -> None:
    """Write a model as canonical JSON (see module docstring)."""
    obj = {
        "version": MODEL_VERSION,
        "schema_id": model.schema_id,
        "class_list": list(model.class_list),
        "init_scores": [float(v) for v in model.init_scores],
        "learning_rate": float(model.learning_rate),
        "forests": [[_tree_to_obj(t) for t in forest] for forest in model.forests],
        "per_round_loss": [float(v) for v in model.per_round_loss],
    }
    Path(path).write_text(_emit(obj) + "\n", encoding="utf-8")


def load_model(path) -> GbmModel:
    """Load a canonical model file; load(save(m)) predicts identically to m."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"{path}: unreadable file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed model file: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: malformed model file: not an object")
    version = obj.get("version")
    if version != MODEL_VERSION:
        raise InputDataError(f"{path}: unsupported model version {version!r}")
    try:
        schema_id = obj["schema_id"]
        class_list = obj["class_list"]
        init_scores = obj["init_scores"]
        learning_rate = obj["learning_rate"]
        forests = obj["forests"]
        per_round_loss = obj["per_round_loss"]
    except KeyError as exc:
        raise FormatError(f"{path}: malformed model file: missing key {exc}") from exc
    if (
        not isinstance(schema_id, str)
        or not isinstance(class_list, list)
        or not all(isinstance(c, str) for c in class_list)
        or len(class_list) < 2
        or not isinstance(init_scores, list)
        or not isinstance(forests, list)
        or not isinstance(per_round_loss, list)
    ):
        raise FormatError(f"{path}: malformed model file: bad field types")
    expected = 1 if len(class_list) == 2 else len(class_list)
    if len(forests) != expected or len(init_scores) != expected:
        raise FormatError(f"{path}: malformed model file: forest count mismatch")
    if not isinstance(learning_rate, (int, float)) or not 0.0 < float(learning_rate) <= 1.0:
        raise FormatError(f"{path}: malformed model file: bad learning_rate")
    return GbmModel(
        schema_id=schema_id,
        class_list=tuple(class_list),
        init_scores=tuple(float(v) for v in init_scores),
        learning_rate=float(learning_rate),
        forests=tuple(tuple(_tree_from_obj(t) for t in forest) for forest in forests),
        per_round_loss=tuple(float(v) for v in per_round_loss),
    )
