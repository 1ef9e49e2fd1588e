"""Model document parsing, validation, and batch classification."""

from __future__ import annotations

import json

import numpy as np
import pytest

from boxprob import (
    ModelFormatError,
    classify,
    classify_batch,
    iter_split_rules,
    parse_model,
    serialize_model,
)
from conftest import leaf_model, random_forest_model, random_tree_model, stump_model


def boosted_doc(*, objective="binary_logistic", n_classes=2, base_score=0.0,
                trees=None, tree_class=None):
    doc = {
        "type": "boosted_ensemble",
        "n_features": 1,
        "n_classes": n_classes,
        "base_score": base_score,
        "objective": objective,
        "trees": trees,
    }
    if tree_class is not None:
        doc["tree_class"] = tree_class
    return doc


def score_leaf(value):
    return {"nodes": [{"leaf_score": value}], "root": 0}


class TestClassification:
    def test_single_leaf_is_constant(self):
        model = leaf_model(label=2, n_features=4)
        assert classify(model, np.zeros(4)) == 2
        assert classify(model, np.full(4, 1e12)) == 2

    def test_stump_sends_threshold_point_left(self):
        model = stump_model(threshold=0.5, left=0, right=1)
        assert classify(model, [0.5]) == 0
        assert classify(model, [np.nextafter(0.5, 1.0)]) == 1
        assert classify(model, [-3.0]) == 0

    def test_majority_vote_over_trees(self):
        doc = {
            "type": "random_forest",
            "n_features": 1,
            "n_classes": 3,
            "trees": [
                {"nodes": [{"leaf_label": 2}], "root": 0},
                {"nodes": [{"leaf_label": 1}], "root": 0},
                {"nodes": [{"leaf_label": 2}], "root": 0},
            ],
        }
        assert classify(parse_model(doc), [0.0]) == 2

    def test_vote_tie_breaks_to_lowest_label(self):
        doc = {
            "type": "random_forest",
            "n_features": 1,
            "n_classes": 3,
            "trees": [
                {"nodes": [{"leaf_label": 2}], "root": 0},
                {"nodes": [{"leaf_label": 1}], "root": 0},
            ],
        }
        assert classify(parse_model(doc), [0.0]) == 1

    def test_binary_logistic_sign_rule(self):
        for score, expected in [(-0.25, 0), (0.0, 0), (0.75, 1)]:
            model = parse_model(boosted_doc(trees=[score_leaf(score)]))
            assert classify(model, [0.0]) == expected

    def test_binary_logistic_base_score_shifts_decision(self):
        model = parse_model(boosted_doc(base_score=0.5,
                                        trees=[score_leaf(-0.25)]))
        assert classify(model, [0.0]) == 1

    def test_softmax_argmax_with_tie_break(self):
        trees = [score_leaf(1.0), score_leaf(0.25), score_leaf(0.75),
                 score_leaf(0.25)]
        model = parse_model(boosted_doc(
            objective="multi_softmax", n_classes=3,
            trees=trees, tree_class=[0, 1, 2, 1]))
        # class scores: 1.0, 0.5, 0.75
        assert classify(model, [0.0]) == 0
        trees = [score_leaf(0.5), score_leaf(0.5), score_leaf(0.25)]
        model = parse_model(boosted_doc(
            objective="multi_softmax", n_classes=3,
            trees=trees, tree_class=[0, 1, 2]))
        assert classify(model, [0.0]) == 0

    def test_classify_rejects_wrong_dimension(self):
        model = stump_model(n_features=2)
        with pytest.raises(ValueError, match="2"):
            classify(model, [0.0])

    def test_batch_matches_scalar(self, rng):
        for kind in ("tree", "forest"):
            if kind == "tree":
                model = random_tree_model(rng, n_features=4, n_classes=3,
                                          max_depth=5)
            else:
                model = random_forest_model(rng, n_trees=5, n_features=4,
                                            n_classes=3, max_depth=4)
            points = rng.normal(size=(256, 4))
            batch = classify_batch(model, points)
            assert batch.tolist() == [classify(model, p) for p in points]

    def test_batch_matches_scalar_boosted(self, rng):
        from conftest import random_tree_nodes

        def score_nodes():
            nodes = random_tree_nodes(rng, 3, 2, max_depth=3)
            return [{"leaf_score": float(rng.normal())} if "leaf_label" in n
                    else n for n in nodes]

        doc = boosted_doc(objective="multi_softmax", n_classes=3,
                          trees=[{"nodes": score_nodes(), "root": 0}
                                 for _ in range(6)],
                          tree_class=[0, 1, 2, 0, 1, 2])
        doc["n_features"] = 3
        model = parse_model(doc)
        points = rng.normal(size=(128, 3))
        batch = classify_batch(model, points)
        assert batch.tolist() == [classify(model, p) for p in points]

    def test_batch_empty_input(self):
        model = stump_model()
        out = classify_batch(model, np.zeros((0, 1)))
        assert out.shape == (0,)


class TestParsing:
    def test_rejects_malformed_required_fields(self):
        with pytest.raises(ModelFormatError, match="type"):
            parse_model({"n_features": 1, "n_classes": 2, "trees": []})
        with pytest.raises(ModelFormatError, match="n_features"):
            parse_model({"type": "decision_tree", "n_features": 0,
                         "n_classes": 2, "trees": []})
        with pytest.raises(ModelFormatError, match="n_classes"):
            parse_model({"type": "decision_tree", "n_features": 1,
                         "n_classes": 1, "trees": []})

    def test_decision_tree_requires_exactly_one_tree(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [{"leaf_label": 0}], "root": 0},
                         {"nodes": [{"leaf_label": 1}], "root": 0}]}
        with pytest.raises(ModelFormatError, match="exactly 1 tree"):
            parse_model(doc)

    def test_rejects_dangling_child_reference(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [
                   {"feature": 0, "threshold": 0.0, "left": 1, "right": 7},
                   {"leaf_label": 0},
               ], "root": 0}]}
        with pytest.raises(ModelFormatError, match=r"trees\[0\].nodes\[0\]"):
            parse_model(doc)

    def test_rejects_cycles(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [
                   {"feature": 0, "threshold": 0.0, "left": 1, "right": 0},
                   {"leaf_label": 0},
               ], "root": 0}]}
        with pytest.raises(ModelFormatError, match="cycl"):
            parse_model(doc)

    def test_shared_subtree_is_allowed(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [
                   {"feature": 0, "threshold": 0.0, "left": 1, "right": 1},
                   {"leaf_label": 1},
               ], "root": 0}]}
        assert classify(parse_model(doc), [5.0]) == 1

    def test_rejects_label_out_of_range(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [{"leaf_label": 2}], "root": 0}]}
        with pytest.raises(ModelFormatError, match="label 2 out of range"):
            parse_model(doc)

    def test_rejects_feature_index_out_of_range(self):
        doc = {"type": "decision_tree", "n_features": 2, "n_classes": 2,
               "trees": [{"nodes": [
                   {"feature": 2, "threshold": 0.0, "left": 1, "right": 2},
                   {"leaf_label": 0}, {"leaf_label": 1}], "root": 0}]}
        with pytest.raises(ModelFormatError, match="feature"):
            parse_model(doc)

    def test_rejects_non_finite_threshold(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [
                   {"feature": 0, "threshold": float("nan"), "left": 1,
                    "right": 2},
                   {"leaf_label": 0}, {"leaf_label": 1}], "root": 0}]}
        with pytest.raises(ModelFormatError, match="threshold"):
            parse_model(doc)

    def test_leaf_payload_must_match_model_family(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [score_leaf(0.5)]}
        with pytest.raises(ModelFormatError, match="leaf_label"):
            parse_model(doc)
        doc = boosted_doc(trees=[{"nodes": [{"leaf_label": 0}], "root": 0}])
        with pytest.raises(ModelFormatError, match="leaf_score"):
            parse_model(doc)

    def test_binary_logistic_requires_two_classes(self):
        doc = boosted_doc(n_classes=3, trees=[score_leaf(0.0)])
        with pytest.raises(ModelFormatError, match="binary_logistic"):
            parse_model(doc)

    def test_softmax_requires_tree_for_every_class(self):
        doc = boosted_doc(objective="multi_softmax", n_classes=3,
                          trees=[score_leaf(0.0), score_leaf(0.0)],
                          tree_class=[0, 1])
        with pytest.raises(ModelFormatError, match=r"classes \[2\]"):
            parse_model(doc)

    def test_rejects_boolean_numeric_fields(self):
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": [
                   {"feature": False, "threshold": 0.0, "left": 1, "right": 2},
                   {"leaf_label": 0}, {"leaf_label": 1}], "root": 0}]}
        with pytest.raises(ModelFormatError):
            parse_model(doc)

    def test_feature_bounds_validation(self):
        doc = {"type": "decision_tree", "n_features": 2, "n_classes": 2,
               "feature_bounds": [[0.0, 1.0]],
               "trees": [{"nodes": [{"leaf_label": 0}], "root": 0}]}
        with pytest.raises(ModelFormatError, match="feature_bounds"):
            parse_model(doc)
        doc["feature_bounds"] = [[0.0, 1.0], [2.0, 2.0]]
        with pytest.raises(ModelFormatError, match="feature_bounds"):
            parse_model(doc)


class TestSerialization:
    def test_threshold_round_trip_is_bit_identical(self):
        values = [0.1, 1.0 / 3.0, np.nextafter(0.5, 1.0), 5e-324, -1e300]
        # chain of splits: node i tests values[i], leaves hang off the left
        nodes = []
        n = len(values)
        for i, t in enumerate(values):
            right = i + 1 if i + 1 < n else n + i
            nodes.append({"feature": 0, "threshold": t, "left": n + i,
                          "right": right})
        nodes.extend({"leaf_label": i % 2} for i in range(n))
        doc = {"type": "decision_tree", "n_features": 1, "n_classes": 2,
               "trees": [{"nodes": nodes, "root": 0}]}
        model = parse_model(doc)
        round_tripped = parse_model(json.loads(json.dumps(
            serialize_model(model))))
        originals = [t for _, t in iter_split_rules(model)]
        recovered = [t for _, t in iter_split_rules(round_tripped)]
        assert len(recovered) == n
        assert all(a == b for a, b in zip(originals, recovered))

    def test_round_trip_preserves_predictions(self, rng):
        model = random_forest_model(rng, n_trees=4, n_features=3,
                                    n_classes=3, max_depth=4)
        clone = parse_model(serialize_model(model))
        points = rng.normal(size=(200, 3))
        assert classify_batch(model, points).tolist() == \
            classify_batch(clone, points).tolist()

    def test_round_trip_preserves_bounds_and_base_score(self):
        doc = boosted_doc(base_score=0.125, trees=[score_leaf(-0.5)])
        doc["feature_bounds"] = [[0.0, 255.0]]
        model = parse_model(doc)
        clone = parse_model(serialize_model(model))
        assert clone.base_score == 0.125
        assert clone.feature_bounds == ((0.0, 255.0),)


class TestSplitRules:
    def test_iterates_all_internal_nodes(self):
        model = stump_model(feature=0, threshold=1.5)
        assert list(iter_split_rules(model)) == [(0, 1.5)]

    def test_single_leaf_has_no_rules(self):
        assert list(iter_split_rules(leaf_model())) == []

    def test_duplicates_across_trees_are_kept(self):
        doc = {"type": "random_forest", "n_features": 1, "n_classes": 2,
               "trees": [
                   {"nodes": [
                       {"feature": 0, "threshold": 2.0, "left": 1, "right": 2},
                       {"leaf_label": 0}, {"leaf_label": 1}], "root": 0},
                   {"nodes": [
                       {"feature": 0, "threshold": 2.0, "left": 1, "right": 2},
                       {"leaf_label": 1}, {"leaf_label": 0}], "root": 0},
               ]}
        assert list(iter_split_rules(parse_model(doc))) == [(0, 2.0), (0, 2.0)]
