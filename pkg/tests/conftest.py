"""Shared model builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from boxprob import Model, parse_model


def leaf_model(label: int = 0, n_features: int = 1, n_classes: int = 3) -> Model:
    return parse_model({
        "type": "decision_tree",
        "n_features": n_features,
        "n_classes": n_classes,
        "trees": [{"nodes": [{"leaf_label": label}], "root": 0}],
    })


def stump_model(feature: int = 0, threshold: float = 0.0, left: int = 0,
                right: int = 1, n_features: int = 1, n_classes: int = 2) -> Model:
    return parse_model({
        "type": "decision_tree",
        "n_features": n_features,
        "n_classes": n_classes,
        "trees": [{"nodes": [
            {"feature": feature, "threshold": threshold, "left": 1, "right": 2},
            {"leaf_label": left},
            {"leaf_label": right},
        ], "root": 0}],
    })


def random_tree_nodes(rng: np.random.Generator, n_features: int, n_classes: int,
                      max_depth: int, leaf_prob: float = 0.25,
                      scale: float = 1.0) -> list[dict]:
    nodes: list[dict] = []

    def build(depth: int) -> int:
        idx = len(nodes)
        if depth == 0 or rng.random() < leaf_prob:
            nodes.append({"leaf_label": int(rng.integers(n_classes))})
        else:
            nodes.append({})
            left = build(depth - 1)
            right = build(depth - 1)
            nodes[idx] = {
                "feature": int(rng.integers(n_features)),
                "threshold": float(np.round(rng.normal(scale=scale), 3)),
                "left": left,
                "right": right,
            }
        return idx

    build(max_depth)
    return nodes


def random_tree_model(rng: np.random.Generator, n_features: int = 3,
                      n_classes: int = 2, max_depth: int = 3,
                      scale: float = 1.0) -> Model:
    return parse_model({
        "type": "decision_tree",
        "n_features": n_features,
        "n_classes": n_classes,
        "trees": [{"nodes": random_tree_nodes(rng, n_features, n_classes,
                                              max_depth, scale=scale),
                   "root": 0}],
    })


def random_forest_model(rng: np.random.Generator, n_trees: int = 3,
                        n_features: int = 3, n_classes: int = 2,
                        max_depth: int = 3) -> Model:
    return parse_model({
        "type": "random_forest",
        "n_features": n_features,
        "n_classes": n_classes,
        "trees": [
            {"nodes": random_tree_nodes(rng, n_features, n_classes, max_depth),
             "root": 0}
            for _ in range(n_trees)
        ],
    })


def random_pd_covariance(rng: np.random.Generator, n: int,
                         jitter: float = 0.3) -> np.ndarray:
    a = rng.normal(size=(n, n))
    cov = a @ a.T + jitter * np.eye(n)
    return 0.5 * (cov + cov.T)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


# Filled by tests/test_acceptance.py; echoed after the run so the
# per-criterion verdicts are visible even when pytest captures stdout.
ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, ok in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(
                f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}")
