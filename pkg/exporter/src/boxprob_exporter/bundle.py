"""Assemble, write, and verify export bundles.

A bundle is a directory of four files the engine consumes directly:

- ``model.json``: the trained classifier in the engine's model schema.
- ``samples.csv``: held-out test points, one per row, with a header.
- ``uncertainty.json``: the input-noise specification for those samples.
- ``manifest.json``: dataset, preprocessing, split seed, training
  parameters, library versions, the training library's predictions for
  every exported sample, and the result of the fidelity check.

The fidelity check runs the installed ``boxprob`` command line on the
written files and requires its per-sample labels to match the training
library's predictions exactly (0 mismatches).  Random-forest soft
voting can genuinely disagree with the engine's majority vote, so a
failed check raises instead of shipping a bundle whose labels lie.
"""

from __future__ import annotations

import json
import platform
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import (
    area_resize,
    load_digits_images,
    load_iris_table,
    load_mnist_images,
    seeded_split,
)
from .trees import boosted_doc, decision_tree_doc, random_forest_doc

__all__ = [
    "ExportBundle",
    "ExportError",
    "FidelityError",
    "export_iris",
    "export_mnist",
    "write_bundle",
]

MODEL_KINDS = ("decision_tree", "random_forest", "boosted_ensemble")


class ExportError(RuntimeError):
    """The export could not be completed."""


class FidelityError(ExportError):
    """Engine labels disagree with the training library's predictions."""


def _require_sklearn():
    try:
        import sklearn  # noqa: F401
    except ImportError as exc:
        raise ExportError(
            "scikit-learn is required to train export models; install it "
            "with: pip install scikit-learn") from exc
    return sklearn


@dataclass
class ExportBundle:
    """An in-memory bundle, ready to be written to a directory."""

    model_doc: dict
    samples: np.ndarray
    feature_names: list[str]
    predictions: list[int]
    uncertainty_doc: dict
    manifest: dict = field(default_factory=dict)


def _versions() -> dict:
    import sklearn

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scikit-learn": sklearn.__version__,
        "boxprob-exporter": __version__,
    }


_SPLIT_NOTE = ("x[feature] <= threshold goes to the left child, identical to "
               "scikit-learn's split rule; thresholds are copied unchanged")


def _train(model_kind: str, depth: int, n_trees: int, learning_rate: float,
           model_seed: int, X: np.ndarray, y: np.ndarray,
           rf_max_features: str = "sqrt") -> tuple[object, dict, dict]:
    """Fit the requested classifier; returns (clf, model_doc, params)."""
    _require_sklearn()
    from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
    from sklearn.tree import DecisionTreeClassifier

    if model_kind == "decision_tree":
        clf = DecisionTreeClassifier(max_depth=depth, random_state=model_seed)
        clf.fit(X, y)
        return clf, decision_tree_doc(clf), {"max_depth": depth}
    if model_kind == "random_forest":
        if rf_max_features not in ("sqrt", "all"):
            raise ExportError(
                f"max_features must be sqrt or all, got {rf_max_features!r}")
        max_features = "sqrt" if rf_max_features == "sqrt" else None
        clf = RandomForestClassifier(n_estimators=n_trees, max_depth=depth,
                                     max_features=max_features,
                                     random_state=model_seed)
        clf.fit(X, y)
        return clf, random_forest_doc(clf), {
            "max_depth": depth, "n_estimators": n_trees,
            "max_features": rf_max_features,
        }
    if model_kind == "boosted_ensemble":
        n_classes = len(np.unique(y))
        per_stage = 1 if n_classes == 2 else n_classes
        if n_trees % per_stage != 0:
            raise ExportError(
                f"boosted export with {n_classes} classes grows {per_stage} "
                f"trees per stage, so --n-trees must be a multiple of "
                f"{per_stage}, got {n_trees}")
        stages = n_trees // per_stage
        clf = GradientBoostingClassifier(n_estimators=stages, max_depth=depth,
                                         learning_rate=learning_rate, init="zero",
                                         random_state=model_seed)
        clf.fit(X, y)
        return clf, boosted_doc(clf), {
            "max_depth": depth, "n_stages": stages, "n_trees_total": n_trees,
            "learning_rate": learning_rate, "init": "zero",
        }
    raise ExportError(f"unknown model kind {model_kind!r} (expected one of {MODEL_KINDS})")


def _gaussian_uncertainty(n_features: int, variance: float) -> dict:
    return {"kind": "mvn", "cov": (variance * np.eye(n_features)).tolist()}


def _iris_norta_uncertainty() -> dict:
    """Correlated non-normal additive noise for the four iris features.

    Three of the four marginals have support bounded below at the
    sample coordinate (exponential, chi-square, and lognormal noise are
    all nonnegative), so perturbations never decrease those features.
    """
    return {
        "kind": "norta",
        "additive": True,
        "marginals": [
            {"family": "normal", "mean": 0.0, "sd": 0.08},
            {"family": "exponential", "rate": 8.0},
            {"family": "chi_square", "df": 3.0, "scale": 0.03},
            {"family": "lognormal", "mu": -2.5, "sigma": 0.4},
        ],
        "spearman": [
            [1.00, 0.20, 0.10, 0.15],
            [0.20, 1.00, 0.25, 0.10],
            [0.10, 0.25, 1.00, 0.30],
            [0.15, 0.10, 0.30, 1.00],
        ],
    }


def export_iris(depth: int = 4, model_kind: str = "decision_tree",
                split_seed: int = 0, model_seed: int = 0, n_trees: int = 6,
                learning_rate: float = 0.1, uncertainty_kind: str = "mvn",
                variance: float = 0.1) -> ExportBundle:
    """Train on a seeded 90/10 iris split and export all 15 test rows."""
    X, y, names = load_iris_table()
    train_idx, test_idx = seeded_split(len(X), split_seed)
    clf, model_doc, params = _train(model_kind, depth, n_trees, learning_rate,
                                    model_seed, X[train_idx], y[train_idx])
    samples = X[test_idx]
    predictions = [int(v) for v in clf.predict(samples)]

    if uncertainty_kind == "mvn":
        uncertainty_doc = _gaussian_uncertainty(4, variance)
        uncertainty_note = f"additive Gaussian noise, covariance {variance} * I"
    elif uncertainty_kind == "norta":
        uncertainty_doc = _iris_norta_uncertainty()
        uncertainty_note = ("correlated additive noise with mixed marginals; "
                            "all but the first feature can only increase")
    else:
        raise ExportError(
            f"unknown uncertainty kind {uncertainty_kind!r} (expected mvn or norta)")

    manifest = {
        "dataset": {
            "name": "iris",
            "source": "sklearn.datasets.load_iris",
            "n_samples": int(len(X)),
            "n_features": 4,
            "feature_names": names,
            "classes": ["setosa", "versicolor", "virginica"],
        },
        "preprocessing": "none (raw measurements in centimeters)",
        "split": {
            "rule": "seeded permutation, first 90% train, remaining 10% test",
            "seed": split_seed,
            "n_train": int(len(train_idx)),
            "n_test": int(len(test_idx)),
        },
        "model": {
            "kind": model_kind,
            "library": "scikit-learn",
            "params": params,
            "seed": model_seed,
        },
        "split_convention": _SPLIT_NOTE,
        "samples": {
            "count": int(len(samples)),
            "origin": "all test rows, in split order",
        },
        "uncertainty": uncertainty_note,
        "predictions": predictions,
        "versions": _versions(),
    }
    feature_names = [n.replace(" (cm)", "").replace(" ", "_") for n in names]
    return ExportBundle(model_doc=model_doc, samples=samples,
                        feature_names=feature_names, predictions=predictions,
                        uncertainty_doc=uncertainty_doc, manifest=manifest)


def export_mnist(resize: tuple[int, int] = (5, 5), model_kind: str = "random_forest",
                 depth: int = 3, n_trees: int = 5, split_seed: int = 0,
                 model_seed: int = 0, variance: float = 0.001,
                 source: str = "mnist", cache_dir=None, n_samples: int = 10,
                 rf_max_features: str = "sqrt") -> ExportBundle:
    """Train a digit classifier on downscaled images; export the first
    ``n_samples`` test images as samples.

    ``resize`` is (height, width), each in 3..10.  Pixels are normalized
    to [0, 1], resized by area-weighted averaging, and flattened
    row-major, so feature ``r * width + c`` is the pixel at (r, c).
    """
    out_h, out_w = resize
    if not (3 <= out_h <= 10 and 3 <= out_w <= 10):
        raise ExportError(f"resize must be between 3x3 and 10x10, got {out_h}x{out_w}")
    if source == "mnist":
        images, labels = load_mnist_images(cache_dir)
        dataset = {"name": "mnist", "source": "IDX files (LeCun et al. corpus)",
                   "native_size": "28x28", "pixel_scale": "bytes / 255"}
    elif source == "digits":
        images, labels = load_digits_images()
        dataset = {"name": "digits", "source": "sklearn.datasets.load_digits",
                   "native_size": "8x8", "pixel_scale": "levels / 16"}
    else:
        raise ExportError(f"unknown source {source!r} (expected mnist or digits)")

    small = area_resize(images, out_h, out_w)
    X = small.reshape(len(small), out_h * out_w)
    train_idx, test_idx = seeded_split(len(X), split_seed)
    clf, model_doc, params = _train(model_kind, depth, n_trees, 0.1,
                                    model_seed, X[train_idx], labels[train_idx],
                                    rf_max_features=rf_max_features)
    if len(test_idx) < n_samples:
        raise ExportError(
            f"test split has only {len(test_idx)} images, need {n_samples}")
    samples = X[test_idx[:n_samples]]
    predictions = [int(v) for v in clf.predict(samples)]

    dataset.update({"n_samples": int(len(X)), "classes": list(range(10))})
    manifest = {
        "dataset": dataset,
        "preprocessing": {
            "normalize": "pixel values scaled to [0, 1]",
            "resize": f"{images.shape[1]}x{images.shape[2]} -> {out_h}x{out_w}, "
                      "area-weighted average",
            "flatten": "row-major (C order): feature = row * width + col",
        },
        "split": {
            "rule": "seeded permutation, first 90% train, remaining 10% test",
            "seed": split_seed,
            "n_train": int(len(train_idx)),
            "n_test": int(len(test_idx)),
        },
        "model": {
            "kind": model_kind,
            "library": "scikit-learn",
            "params": params,
            "seed": model_seed,
        },
        "split_convention": _SPLIT_NOTE,
        "samples": {
            "count": int(len(samples)),
            "origin": f"first {n_samples} test images, in split order",
        },
        "uncertainty": f"additive Gaussian noise, covariance {variance} * I",
        "predictions": predictions,
        "versions": _versions(),
    }
    feature_names = [f"px_{r}_{c}" for r in range(out_h) for c in range(out_w)]
    return ExportBundle(model_doc=model_doc, samples=samples,
                        feature_names=feature_names, predictions=predictions,
                        uncertainty_doc=_gaussian_uncertainty(out_h * out_w, variance),
                        manifest=manifest)


def _samples_csv(bundle: ExportBundle) -> str:
    lines = [",".join(bundle.feature_names)]
    for row in bundle.samples:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _engine_labels(model_path: Path, samples_path: Path,
                   uncertainty_path: Path) -> list[int]:
    """Per-sample labels from the engine CLI (a one-draw run: labels only)."""
    exe = shutil.which("boxprob")
    if exe is None:
        raise ExportError(
            "the boxprob command line is required for the fidelity check; "
            "install it with: pip install boxprob (or skip with --no-verify)")
    cmd = [exe, "compute", "--model", str(model_path), "--samples", str(samples_path),
           "--uncertainty", str(uncertainty_path), "--method", "mc:1",
           "--seed", "0", "--omit-timings"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise ExportError(
            f"engine rejected the exported bundle: {proc.stderr.strip() or proc.stdout.strip()}")
    report = json.loads(proc.stdout)
    return [int(row["label"]) for row in report["rows"]]


def write_bundle(bundle: ExportBundle, out_dir: str | Path,
                 verify: bool = True) -> list[Path]:
    """Write the four bundle files; verify label fidelity via the engine CLI.

    Raises FidelityError when any exported sample's engine label differs
    from the training library's prediction.  The manifest (including the
    failed check's counts) is written first so the bundle can be
    inspected.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    samples_path = out / "samples.csv"
    uncertainty_path = out / "uncertainty.json"
    manifest_path = out / "manifest.json"

    model_path.write_text(json.dumps(bundle.model_doc, indent=2) + "\n", encoding="utf-8")
    samples_path.write_text(_samples_csv(bundle), encoding="utf-8")
    uncertainty_path.write_text(json.dumps(bundle.uncertainty_doc, indent=2) + "\n",
                                encoding="utf-8")

    mismatches = 0
    if verify:
        engine = _engine_labels(model_path, samples_path, uncertainty_path)
        mismatches = int(sum(e != p for e, p in zip(engine, bundle.predictions)))
        bundle.manifest["fidelity"] = {
            "check": "labels from `boxprob compute --method mc:1` against "
                     "the training library's predict()",
            "engine_labels": engine,
            "mismatches": mismatches,
        }
    else:
        bundle.manifest["fidelity"] = {"check": "skipped (--no-verify)"}

    manifest_path.write_text(json.dumps(bundle.manifest, indent=2) + "\n",
                             encoding="utf-8")
    if mismatches:
        raise FidelityError(
            f"{mismatches} of {len(bundle.predictions)} exported samples "
            f"disagree between the engine and the training library "
            f"(see {manifest_path}); retrain with a different seed")
    return [model_path, samples_path, uncertainty_path, manifest_path]
