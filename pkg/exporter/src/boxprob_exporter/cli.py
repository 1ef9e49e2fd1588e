"""Command-line frontend: train and export bundles.

Subcommands:

- ``export-iris``: 90/10 split of the iris table, all 15 test rows.
- ``export-mnist``: digit images downscaled to a small grid (3x3 to
  10x10), first 10 test images; ``--source digits`` substitutes the
  bundled offline 8x8 dataset when MNIST cannot be downloaded.

Both write model.json, samples.csv, uncertainty.json, and
manifest.json into --out and finish with a fidelity check that runs
the installed ``boxprob`` command line on the written files.
"""

from __future__ import annotations

import argparse
import shlex
import sys

from .bundle import (
    MODEL_KINDS,
    ExportError,
    export_iris,
    export_mnist,
    write_bundle,
)
from .datasets import DatasetError

__all__ = ["main"]


def _parse_resize(token: str) -> tuple[int, int]:
    h, sep, w = token.lower().partition("x")
    if not sep:
        raise argparse.ArgumentTypeError(
            f"resize must look like 5x5, got {token!r}")
    try:
        out = (int(h), int(w))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"resize must look like 5x5, got {token!r}") from None
    if not all(3 <= v <= 10 for v in out):
        raise argparse.ArgumentTypeError(
            f"resize sides must be between 3 and 10, got {token!r}")
    return out


def _add_common(p: argparse.ArgumentParser, default_depth: int) -> None:
    p.add_argument("--out", required=True, help="directory to write the bundle into")
    p.add_argument("--model-kind", choices=MODEL_KINDS, default=None,
                   help="classifier to train")
    p.add_argument("--depth", type=int, default=default_depth, help="tree depth cap")
    p.add_argument("--split-seed", type=int, default=0,
                   help="seed of the 90/10 train/test shuffle")
    p.add_argument("--model-seed", type=int, default=0,
                   help="seed passed to the training library")
    p.add_argument("--no-verify", action="store_true",
                   help="skip the engine fidelity check")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(
        prog="boxprob-export",
        description="Train small tree classifiers and export boxprob bundles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_iris = sub.add_parser("export-iris", help="iris table, 15 test samples")
    _add_common(p_iris, default_depth=4)
    p_iris.add_argument("--n-trees", type=int, default=6,
                        help="total trees for forest/boosted kinds")
    p_iris.add_argument("--learning-rate", type=float, default=0.1,
                        help="boosted shrinkage")
    p_iris.add_argument("--uncertainty-kind", choices=("mvn", "norta"), default="mvn",
                        help="noise written to uncertainty.json")
    p_iris.add_argument("--variance", type=float, default=0.1,
                        help="per-feature variance of mvn noise")

    p_mnist = sub.add_parser("export-mnist", help="digit images, 10 test samples")
    _add_common(p_mnist, default_depth=3)
    p_mnist.add_argument("--resize", type=_parse_resize, default=(5, 5),
                         help="output grid, e.g. 5x5 (sides 3..10)")
    p_mnist.add_argument("--n-trees", type=int, default=5,
                         help="total trees for forest/boosted kinds")
    p_mnist.add_argument("--variance", type=float, default=0.001,
                         help="per-feature variance of mvn noise")
    p_mnist.add_argument("--source", choices=("mnist", "digits"), default="mnist",
                         help="image corpus (digits needs no download)")
    p_mnist.add_argument("--cache-dir", default=None,
                         help="where MNIST IDX files live / are downloaded to")
    p_mnist.add_argument("--max-features", choices=("sqrt", "all"), default="sqrt",
                         help="features considered per forest split")

    args = parser.parse_args(argv)
    try:
        if args.command == "export-iris":
            bundle = export_iris(
                depth=args.depth,
                model_kind=args.model_kind or "decision_tree",
                split_seed=args.split_seed, model_seed=args.model_seed,
                n_trees=args.n_trees, learning_rate=args.learning_rate,
                uncertainty_kind=args.uncertainty_kind, variance=args.variance)
        else:
            bundle = export_mnist(
                resize=args.resize,
                model_kind=args.model_kind or "random_forest",
                depth=args.depth, n_trees=args.n_trees,
                split_seed=args.split_seed, model_seed=args.model_seed,
                variance=args.variance, source=args.source,
                cache_dir=args.cache_dir, rf_max_features=args.max_features)
        bundle.manifest["command"] = shlex.join(["boxprob-export", *argv])
        paths = write_bundle(bundle, args.out, verify=not args.no_verify)
    except (ExportError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for path in paths:
        print(f"wrote {path}")
    fidelity = bundle.manifest["fidelity"]
    if "mismatches" in fidelity:
        print(f"fidelity: {fidelity['mismatches']} mismatches on "
              f"{len(bundle.predictions)} samples")
    else:
        print("fidelity: check skipped")
    return 0


if __name__ == "__main__":
    sys.exit(main())
