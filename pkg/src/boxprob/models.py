"""Tree-based classifier models: parsing, evaluation, split-rule access.

Supports three model kinds sharing one node arena layout:

- ``decision_tree``: a single tree with class-label leaves.
- ``random_forest``: label-leaf trees aggregated by majority vote,
  ties broken toward the lowest class index.
- ``boosted_ensemble``: score-leaf trees whose leaf values are summed
  (plus ``base_score``) and decided by the objective, either
  ``binary_logistic`` (label 1 iff raw score > 0) or ``multi_softmax``
  (argmax of per-class score sums).

The split rule is ``x[feature] <= threshold`` goes left.  Thresholds
are kept as exact binary floats; serialization round-trips them
bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "Model",
    "ModelFormatError",
    "Tree",
    "classify",
    "classify_batch",
    "iter_split_rules",
    "parse_model",
    "serialize_model",
]

_MODEL_KINDS = ("decision_tree", "random_forest", "boosted_ensemble")
_OBJECTIVES = ("binary_logistic", "multi_softmax")

# Sentinel stored in Tree.feature for leaf nodes.
_LEAF = -1


class ModelFormatError(ValueError):
    """A model document violates the schema or a structural invariant."""


@dataclass(frozen=True)
class Tree:
    """One decision tree as parallel node arrays.

    ``feature[i] == -1`` marks node ``i`` as a leaf whose payload is
    ``value[i]`` (a class label for label-leaf trees, a raw score for
    score-leaf trees).  Split nodes route to ``left[i]`` when
    ``x[feature[i]] <= threshold[i]`` and to ``right[i]`` otherwise.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    root: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_value(self, x: np.ndarray) -> float:
        """Traverse from the root for a single point."""
        i = self.root
        while self.feature[i] != _LEAF:
            if x[self.feature[i]] <= self.threshold[i]:
                i = self.left[i]
            else:
                i = self.right[i]
        return float(self.value[i])

    def leaf_values(self, points: np.ndarray) -> np.ndarray:
        """Vectorized traversal; ``points`` has shape (m, n_features)."""
        idx = np.full(points.shape[0], self.root, dtype=np.int64)
        active = self.feature[idx] != _LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            cur = idx[rows]
            feat = self.feature[cur]
            go_left = points[rows, feat] <= self.threshold[cur]
            idx[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active[rows] = self.feature[idx[rows]] != _LEAF
        return self.value[idx]


@dataclass(frozen=True)
class Model:
    """A parsed classifier: trees plus aggregation metadata.

    ``feature_bounds`` entries are (lo, hi) pairs or None for
    unbounded features; the whole attribute may be None.
    ``tree_class`` maps each tree to the class whose score it
    contributes to (multi_softmax boosted models only).
    """

    kind: str
    n_features: int
    n_classes: int
    trees: tuple[Tree, ...]
    feature_bounds: tuple[tuple[float, float] | None, ...] | None = None
    base_score: float = 0.0
    objective: str | None = None
    tree_class: tuple[int, ...] | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise ModelFormatError(f"{where}: {message}")


def _as_int(obj: object, where: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ModelFormatError(f"{where}: expected an integer, got {type(obj).__name__}")
    return obj


def _as_float(obj: object, where: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ModelFormatError(f"{where}: expected a number, got {type(obj).__name__}")
    return float(obj)


def _parse_tree(doc: object, where: str, leaf_kind: str, n_features: int, n_classes: int) -> Tree:
    _require(isinstance(doc, dict), where, "tree must be an object")
    _require("nodes" in doc, where, 'missing "nodes"')
    _require("root" in doc, where, 'missing "root"')
    nodes = doc["nodes"]
    _require(isinstance(nodes, list) and nodes, where, '"nodes" must be a non-empty array')
    n = len(nodes)

    feature = np.full(n, _LEAF, dtype=np.int64)
    threshold = np.zeros(n, dtype=np.float64)
    left = np.zeros(n, dtype=np.int64)
    right = np.zeros(n, dtype=np.int64)
    value = np.zeros(n, dtype=np.float64)

    payload_key = "leaf_label" if leaf_kind == "label" else "leaf_score"
    for i, node in enumerate(nodes):
        node_where = f"{where}.nodes[{i}]"
        _require(isinstance(node, dict), node_where, "node must be an object")
        if "feature" in node:
            for key in ("threshold", "left", "right"):
                _require(key in node, node_where, f'split node missing "{key}"')
            f = _as_int(node["feature"], f"{node_where}.feature")
            _require(0 <= f < n_features, node_where,
                     f"feature index {f} out of range [0, {n_features})")
            t = _as_float(node["threshold"], f"{node_where}.threshold")
            _require(np.isfinite(t), node_where, f"threshold {t!r} is not finite")
            l = _as_int(node["left"], f"{node_where}.left")
            r = _as_int(node["right"], f"{node_where}.right")
            for name, child in (("left", l), ("right", r)):
                _require(0 <= child < n, node_where,
                         f"dangling {name} reference {child} (valid range [0, {n}))")
            feature[i], threshold[i], left[i], right[i] = f, t, l, r
        elif payload_key in node:
            if leaf_kind == "label":
                lab = _as_int(node["leaf_label"], f"{node_where}.leaf_label")
                _require(0 <= lab < n_classes, node_where,
                         f"class label {lab} out of range [0, {n_classes})")
                value[i] = lab
            else:
                value[i] = _as_float(node["leaf_score"], f"{node_where}.leaf_score")
        else:
            other = "leaf_score" if payload_key == "leaf_label" else "leaf_label"
            if other in node:
                raise ModelFormatError(
                    f'{node_where}: "{other}" leaf not allowed in this model kind '
                    f'(expected "{payload_key}")')
            raise ModelFormatError(
                f'{node_where}: node is neither a split ("feature") nor a leaf ("{payload_key}")')

    root = _as_int(doc["root"], f"{where}.root")
    _require(0 <= root < n, where, f"root index {root} out of range [0, {n})")

    # Walk from the root: every reachable path must terminate at a leaf,
    # and no node may be revisited along a path (acyclicity).
    state = np.zeros(n, dtype=np.int8)  # 0 unvisited, 1 on stack, 2 done
    stack: list[tuple[int, bool]] = [(root, False)]
    while stack:
        node_idx, leaving = stack.pop()
        if leaving:
            state[node_idx] = 2
            continue
        if state[node_idx] == 1:
            raise ModelFormatError(f"{where}.nodes[{node_idx}]: cyclic node reference")
        if state[node_idx] == 2:
            # Shared subtree: already checked, harmless for evaluation.
            continue
        state[node_idx] = 1
        stack.append((node_idx, True))
        if feature[node_idx] != _LEAF:
            stack.append((int(left[node_idx]), False))
            stack.append((int(right[node_idx]), False))

    return Tree(feature=feature, threshold=threshold, left=left, right=right,
                value=value, root=root)


def parse_model(document: str | dict) -> Model:
    """Parse a model JSON document (text or an already-decoded dict).

    Raises ModelFormatError with the offending node path on schema
    violations, dangling/cyclic references, and out-of-range indices.
    """
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model document is not valid JSON: {exc}") from exc
    else:
        doc = document
    _require(isinstance(doc, dict), "model", "top level must be an object")

    for key in ("type", "n_features", "n_classes", "trees"):
        _require(key in doc, "model", f'missing "{key}"')
    kind = doc["type"]
    _require(kind in _MODEL_KINDS, "model.type",
             f"unknown model type {kind!r} (expected one of {_MODEL_KINDS})")
    n_features = _as_int(doc["n_features"], "model.n_features")
    n_classes = _as_int(doc["n_classes"], "model.n_classes")
    _require(n_features >= 1, "model.n_features", "must be >= 1")
    _require(n_classes >= 2, "model.n_classes", "must be >= 2")

    bounds_doc = doc.get("feature_bounds")
    feature_bounds: tuple[tuple[float, float] | None, ...] | None = None
    if bounds_doc is not None:
        _require(isinstance(bounds_doc, list) and len(bounds_doc) == n_features,
                 "model.feature_bounds", f"must be null or an array of length {n_features}")
        parsed_bounds: list[tuple[float, float] | None] = []
        for i, pair in enumerate(bounds_doc):
            if pair is None:
                parsed_bounds.append(None)
                continue
            where = f"model.feature_bounds[{i}]"
            _require(isinstance(pair, list) and len(pair) == 2, where,
                     "must be null or a [lo, hi] pair")
            lo = _as_float(pair[0], f"{where}[0]")
            hi = _as_float(pair[1], f"{where}[1]")
            _require(lo < hi, where, f"requires lo < hi, got [{lo}, {hi}]")
            parsed_bounds.append((lo, hi))
        feature_bounds = tuple(parsed_bounds)

    trees_doc = doc["trees"]
    _require(isinstance(trees_doc, list) and trees_doc, "model.trees",
             "must be a non-empty array")

    base_score = 0.0
    objective = None
    tree_class: tuple[int, ...] | None = None
    leaf_kind = "label"

    if kind == "decision_tree":
        _require(len(trees_doc) == 1, "model.trees",
                 f"decision_tree must have exactly 1 tree, got {len(trees_doc)}")
    elif kind == "boosted_ensemble":
        leaf_kind = "score"
        _require("objective" in doc, "model", 'boosted_ensemble missing "objective"')
        objective = doc["objective"]
        _require(objective in _OBJECTIVES, "model.objective",
                 f"unknown objective {objective!r} (expected one of {_OBJECTIVES})")
        if "base_score" in doc:
            base_score = _as_float(doc["base_score"], "model.base_score")
        if objective == "binary_logistic":
            _require(n_classes == 2, "model.n_classes",
                     "binary_logistic requires n_classes = 2")
            _require("tree_class" not in doc or doc["tree_class"] is None,
                     "model.tree_class", "not allowed with binary_logistic")
        else:
            _require("tree_class" in doc, "model", 'multi_softmax missing "tree_class"')
            tc_doc = doc["tree_class"]
            _require(isinstance(tc_doc, list) and len(tc_doc) == len(trees_doc),
                     "model.tree_class",
                     f"must be an array of length {len(trees_doc)} (one class per tree)")
            tc = []
            for i, c in enumerate(tc_doc):
                ci = _as_int(c, f"model.tree_class[{i}]")
                _require(0 <= ci < n_classes, f"model.tree_class[{i}]",
                         f"class index {ci} out of range [0, {n_classes})")
                tc.append(ci)
            missing = sorted(set(range(n_classes)) - set(tc))
            _require(not missing, "model.tree_class",
                     f"every class needs at least one tree; classes {missing} have none")
            tree_class = tuple(tc)

    trees = tuple(
        _parse_tree(t, f"model.trees[{i}]", leaf_kind, n_features, n_classes)
        for i, t in enumerate(trees_doc)
    )

    return Model(kind=kind, n_features=n_features, n_classes=n_classes, trees=trees,
                 feature_bounds=feature_bounds, base_score=base_score,
                 objective=objective, tree_class=tree_class)


def _tree_to_doc(tree: Tree, leaf_kind: str) -> dict:
    nodes: list[dict] = []
    for i in range(tree.n_nodes):
        if tree.feature[i] != _LEAF:
            nodes.append({
                "feature": int(tree.feature[i]),
                "threshold": float(tree.threshold[i]),
                "left": int(tree.left[i]),
                "right": int(tree.right[i]),
            })
        elif leaf_kind == "label":
            nodes.append({"leaf_label": int(tree.value[i])})
        else:
            nodes.append({"leaf_score": float(tree.value[i])})
    return {"nodes": nodes, "root": tree.root}


def serialize_model(model: Model) -> str:
    """Serialize back to schema JSON; thresholds round-trip bit-identically."""
    leaf_kind = "score" if model.kind == "boosted_ensemble" else "label"
    doc: dict = {
        "type": model.kind,
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "feature_bounds": None if model.feature_bounds is None else [
            None if b is None else [b[0], b[1]] for b in model.feature_bounds
        ],
        "trees": [_tree_to_doc(t, leaf_kind) for t in model.trees],
    }
    if model.kind == "boosted_ensemble":
        doc["base_score"] = model.base_score
        doc["objective"] = model.objective
        if model.objective == "multi_softmax":
            doc["tree_class"] = list(model.tree_class or ())
    return json.dumps(doc, indent=2)


def classify_batch(model: Model, points: np.ndarray) -> np.ndarray:
    """Predict class labels for an (m, n_features) array of points."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.n_features:
        raise ValueError(
            f"points shape {points.shape} does not match n_features = {model.n_features}")
    m = points.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.int64)

    if model.kind == "decision_tree":
        return model.trees[0].leaf_values(points).astype(np.int64)

    if model.kind == "random_forest":
        votes = np.zeros((m, model.n_classes), dtype=np.int64)
        rows = np.arange(m)
        for tree in model.trees:
            labels = tree.leaf_values(points).astype(np.int64)
            votes[rows, labels] += 1
        # argmax returns the first maximum: ties go to the lowest class
        return votes.argmax(axis=1)

    scores = np.zeros((m, model.n_classes), dtype=np.float64)
    if model.objective == "binary_logistic":
        raw = np.full(m, model.base_score)
        for tree in model.trees:
            raw += tree.leaf_values(points)
        return (raw > 0.0).astype(np.int64)
    assert model.tree_class is not None
    scores += model.base_score
    for tree, cls in zip(model.trees, model.tree_class):
        scores[:, cls] += tree.leaf_values(points)
    return scores.argmax(axis=1)


def classify(model: Model, point: np.ndarray) -> int:
    """Predict the class label of a single N-vector."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (model.n_features,):
        raise ValueError(
            f"point shape {point.shape} does not match n_features = {model.n_features}")
    return int(classify_batch(model, point[None, :])[0])


def iter_split_rules(model: Model) -> Iterator[tuple[int, float]]:
    """Yield (feature, threshold) for every split node of every tree.

    Duplicates are yielded as-is; deduplication happens downstream when
    threshold sets are built.
    """
    for tree in model.trees:
        for i in np.nonzero(tree.feature != _LEAF)[0]:
            yield int(tree.feature[i]), float(tree.threshold[i])
