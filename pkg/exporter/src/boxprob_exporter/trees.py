"""Convert fitted scikit-learn tree models to the engine's model schema.

scikit-learn routes a point to the left child when
``x[feature] <= threshold``, which is exactly the engine's convention,
so thresholds are exported unchanged.  Node ids are kept as-is (scikit-
learn already stores trees as index-linked node arrays with root 0).

Conversion notes per model kind:

- ``DecisionTreeClassifier``: leaf label = argmax of the leaf's class
  counts, the same first-maximum rule ``predict`` uses.
- ``RandomForestClassifier``: each member tree is exported with label
  leaves.  scikit-learn aggregates member *probabilities* while the
  engine majority-votes member *labels*; the two can disagree on points
  where the soft and hard votes differ, which is why bundles carry a
  per-sample fidelity check instead of assuming agreement.
- ``GradientBoostingClassifier``: leaf score = learning_rate x stored
  leaf value, matching the library's staged accumulation.  Training
  must use ``init="zero"`` so the exported ``base_score`` of 0 is
  exact.  For more than two classes the stages are laid out
  stage-major (stage 0 class 0, stage 0 class 1, ...), recorded in
  ``tree_class``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "boosted_doc",
    "decision_tree_doc",
    "random_forest_doc",
]

_SK_LEAF = -1  # scikit-learn's children_left/right sentinel


def _check_contiguous_classes(classes: np.ndarray) -> int:
    n = len(classes)
    if not np.array_equal(classes, np.arange(n)):
        raise ValueError(
            f"class labels must be 0..{n - 1} with every class present in the "
            f"training data, got {classes.tolist()}")
    return n


def _label_tree_nodes(tree) -> list[dict]:
    """Nodes of one fitted sklearn tree with argmax-count label leaves."""
    nodes: list[dict] = []
    for i in range(tree.node_count):
        if tree.children_left[i] == _SK_LEAF:
            nodes.append({"leaf_label": int(np.argmax(tree.value[i, 0, :]))})
        else:
            nodes.append({
                "feature": int(tree.feature[i]),
                "threshold": float(tree.threshold[i]),
                "left": int(tree.children_left[i]),
                "right": int(tree.children_right[i]),
            })
    return nodes


def _score_tree_nodes(tree, scale: float) -> list[dict]:
    """Nodes of one fitted sklearn regression tree with scaled score leaves."""
    nodes: list[dict] = []
    for i in range(tree.node_count):
        if tree.children_left[i] == _SK_LEAF:
            nodes.append({"leaf_score": float(scale * tree.value[i, 0, 0])})
        else:
            nodes.append({
                "feature": int(tree.feature[i]),
                "threshold": float(tree.threshold[i]),
                "left": int(tree.children_left[i]),
                "right": int(tree.children_right[i]),
            })
    return nodes


def decision_tree_doc(clf) -> dict:
    """Export a fitted DecisionTreeClassifier."""
    n_classes = _check_contiguous_classes(np.asarray(clf.classes_))
    return {
        "type": "decision_tree",
        "n_features": int(clf.n_features_in_),
        "n_classes": n_classes,
        "feature_bounds": None,
        "trees": [{"nodes": _label_tree_nodes(clf.tree_), "root": 0}],
    }


def random_forest_doc(clf) -> dict:
    """Export a fitted RandomForestClassifier (one label-leaf tree per member)."""
    n_classes = _check_contiguous_classes(np.asarray(clf.classes_))
    return {
        "type": "random_forest",
        "n_features": int(clf.n_features_in_),
        "n_classes": n_classes,
        "feature_bounds": None,
        "trees": [{"nodes": _label_tree_nodes(est.tree_), "root": 0}
                  for est in clf.estimators_],
    }


def boosted_doc(clf) -> dict:
    """Export a fitted GradientBoostingClassifier trained with init="zero"."""
    if clf.init != "zero":
        raise ValueError(
            'boosted export requires training with init="zero" so the base '
            f"score is exactly 0, got init={clf.init!r}")
    n_classes = _check_contiguous_classes(np.asarray(clf.classes_))
    lr = float(clf.learning_rate)
    stages = clf.estimators_  # shape (n_stages, 1) binary, (n_stages, K) multiclass

    doc: dict = {
        "type": "boosted_ensemble",
        "n_features": int(clf.n_features_in_),
        "n_classes": n_classes,
        "feature_bounds": None,
        "base_score": 0.0,
    }
    if stages.shape[1] == 1:
        doc["objective"] = "binary_logistic"
        doc["trees"] = [{"nodes": _score_tree_nodes(stage[0].tree_, lr), "root": 0}
                        for stage in stages]
    else:
        doc["objective"] = "multi_softmax"
        trees = []
        tree_class = []
        for stage in stages:
            for k, est in enumerate(stage):
                trees.append({"nodes": _score_tree_nodes(est.tree_, lr), "root": 0})
                tree_class.append(k)
        doc["trees"] = trees
        doc["tree_class"] = tree_class
    return doc
