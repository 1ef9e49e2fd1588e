"""Command-line frontend.

Subcommands:

- ``compute``: robustness of each sample under one method.
- ``compare``: several methods side by side plus agreement statistics
  (R-squared against the first method, max absolute difference, and
  pruning-bound checks).
- ``inspect``: model summary with the partition size.

Reports are JSON (default) or CSV; with a fixed --seed they are
byte-identical across runs and worker counts.  The BOXPROB_THREADS
environment variable caps the worker pool; samples are processed
concurrently and rows always appear in input order.

R-squared here measures agreement with the identity line, not a fitted
regression: 1 - sum((y-x)^2) / sum((y-mean(y))^2) with x the first
method's values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .boxes import build_threshold_sets, count_boxes
from .formats import load_model_file, load_samples_file, load_uncertainty_file
from .mc import mc_robustness
from .models import Model, classify
from .mvn import IntegratorConfig
from .robustness import Query, compute_robustness, prune_error_bound

__all__ = ["main"]

_CSV_COLUMNS = (
    "sample", "method", "label", "robustness", "misclassification_probability",
    "std_error", "n_samples", "raw_sum", "boxes_enumerated", "boxes_matching",
    "integration_err", "prune_error_bound", "converged", "points_used",
    "wall_time_ms", "error",
)


def _worker_count() -> int:
    env = os.environ.get("BOXPROB_THREADS")
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise SystemExit(f"BOXPROB_THREADS must be an integer, got {env!r}")
        if workers < 1:
            raise SystemExit(f"BOXPROB_THREADS must be >= 1, got {workers}")
        return workers
    return os.cpu_count() or 1


def _parse_method(token: str, args: argparse.Namespace) -> tuple[str, str, float | int]:
    """Normalize a --method token to (family, display name, parameter)."""
    name, _, param = token.partition(":")
    if name == "full":
        if param:
            raise ValueError(f"--method full takes no parameter, got {token!r}")
        return "full", "full", 0
    if name == "pruned":
        level = args.prune_level if not param else float(param)
        if not 0.0 < level < 1.0:
            raise ValueError(f"prune level must be in (0, 1), got {level}")
        return "pruned", f"pruned:{level:g}", level
    if name == "mc":
        n = args.mc_samples if not param else int(param)
        if n < 1:
            raise ValueError(f"mc sample count must be >= 1, got {n}")
        return "mc", f"mc:{n}", n
    raise ValueError(f"unknown method {token!r} (expected full, pruned[:level], mc[:n])")


def _sample_seeds(base_seed: int, index: int) -> tuple[int, int]:
    """Independent integrator and MC seeds for one sample row."""
    words = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(
        2, dtype=np.uint64)
    return int(words[0]), int(words[1])


def _compute_row(model: Model, sample: np.ndarray, spec, index: int,
                 family: str, display: str, param: float | int,
                 args: argparse.Namespace) -> dict:
    row: dict = {"sample": index, "method": display}
    t0 = time.perf_counter()
    try:
        uncertainty = spec.resolve(sample)
        integrator_seed, mc_seed = _sample_seeds(args.seed, index)
        if family == "mc":
            q = Query(sample=sample, uncertainty=uncertainty)
            est = mc_robustness(model, q, int(param), seed=mc_seed)
            row.update(
                label=_label_of(model, sample),
                robustness=est.robustness_hat,
                misclassification_probability=1.0 - est.robustness_hat,
                std_error=est.std_error,
                n_samples=est.n_samples,
            )
        else:
            cfg = IntegratorConfig(abs_tol=args.abs_tol, seed=integrator_seed)
            q = Query(
                sample=sample,
                uncertainty=uncertainty,
                prune_level=None if family == "full" else float(param),
                integrator=cfg,
                max_boxes=args.max_boxes,
                collect_box_masses=args.verbose,
            )
            report = compute_robustness(model, q)
            row.update(
                label=report.label,
                robustness=report.robustness,
                misclassification_probability=report.misclassification_probability,
                raw_sum=report.raw_sum,
                boxes_enumerated=report.boxes_enumerated,
                boxes_matching=report.boxes_matching,
                integration_err=report.integration_err,
                prune_error_bound=report.prune_error_bound,
                converged=report.converged,
                points_used=report.points_used,
            )
            if args.verbose:
                row["box_masses"] = [
                    {"box": list(idx), "mass": mass}
                    for idx, mass in report.box_masses
                ]
    except (ValueError, RuntimeError) as exc:
        row["error"] = str(exc)
    if not args.omit_timings:
        row["wall_time_ms"] = round((time.perf_counter() - t0) * 1e3, 3)
    return row


def _label_of(model: Model, sample: np.ndarray) -> int:
    return classify(model, sample)


def _run_methods(model: Model, samples: np.ndarray, specs, methods,
                 args: argparse.Namespace) -> list[dict]:
    tasks = [
        (i, family, display, param)
        for i in range(samples.shape[0])
        for family, display, param in methods
    ]

    def work(task):
        i, family, display, param = task
        return _compute_row(model, samples[i], specs[i], i, family, display,
                            param, args)

    workers = min(_worker_count(), max(1, len(tasks)))
    if workers == 1:
        return [work(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, tasks))


def _agreement(rows: list[dict], methods) -> dict:
    """Pairwise agreement of each method against the first one."""
    by_method: dict[str, dict[int, dict]] = {}
    for row in rows:
        by_method.setdefault(row["method"], {})[row["sample"]] = row
    base_family, base_display, _ = methods[0]
    pairs = []
    for family, display, param in methods[1:]:
        base_rows = by_method.get(base_display, {})
        other_rows = by_method.get(display, {})
        ids = sorted(set(base_rows) & set(other_rows))
        ids = [i for i in ids
               if "error" not in base_rows[i] and "error" not in other_rows[i]]
        x = np.asarray([base_rows[i]["robustness"] for i in ids])
        y = np.asarray([other_rows[i]["robustness"] for i in ids])
        pair: dict = {"baseline": base_display, "method": display,
                      "n_samples": len(ids)}
        if len(ids):
            ss_res = float(((y - x) ** 2).sum())
            ss_tot = float(((y - y.mean()) ** 2).sum())
            if ss_res == 0.0:
                pair["r_squared"] = 1.0
            elif ss_tot == 0.0:
                pair["r_squared"] = None
            else:
                pair["r_squared"] = 1.0 - ss_res / ss_tot
            pair["max_abs_diff"] = float(np.abs(y - x).max())
        else:
            pair["r_squared"] = None
            pair["max_abs_diff"] = None
        if base_family == "full" and family == "pruned":
            bound = prune_error_bound(float(param))
            violations = [
                i for i, xi, yi in zip(ids, x, y)
                if not -1e-9 <= xi - yi <= bound + 1e-9
            ]
            pair["prune_bound"] = bound
            pair["prune_bound_violations"] = violations
        pairs.append(pair)
    return {"pairs": pairs}


def _emit(report: dict, args: argparse.Namespace) -> None:
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        lines = [",".join(_CSV_COLUMNS)]
        for row in report.get("rows", []):
            cells = []
            for col in _CSV_COLUMNS:
                value = row.get(col)
                if value is None:
                    cells.append("")
                elif isinstance(value, bool):
                    cells.append("true" if value else "false")
                elif isinstance(value, float):
                    cells.append(repr(value))
                else:
                    cells.append(str(value))
            lines.append(",".join(cells))
        for pair in report.get("aggregate", {}).get("pairs", []):
            lines.append("# " + json.dumps(pair))
        text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_compute_like(args: argparse.Namespace, methods) -> int:
    try:
        model = load_model_file(args.model)
        samples = load_samples_file(args.samples)
        if samples.size and samples.shape[1] != model.n_features:
            raise ValueError(
                f"{args.samples}: samples have {samples.shape[1]} columns, "
                f"model expects {model.n_features}")
        specs = load_uncertainty_file(args.uncertainty, model.n_features,
                                      samples.shape[0])
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = _run_methods(model, samples, specs, methods, args)
    report = {
        "command": args.command,
        "model": str(args.model),
        "samples": str(args.samples),
        "uncertainty": str(args.uncertainty),
        "seed": args.seed,
        "methods": [display for _, display, _ in methods],
        "rows": rows,
    }
    if args.command == "compare":
        report["aggregate"] = _agreement(rows, methods)
    _emit(report, args)
    return 2 if any("error" in r for r in rows) else 0


def _tree_depth(tree) -> int:
    depth = 0
    stack = [(tree.root, 0)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if tree.feature[node] != -1:
            stack.append((int(tree.left[node]), d + 1))
            stack.append((int(tree.right[node]), d + 1))
    return depth


def _cmd_inspect(args: argparse.Namespace) -> int:
    try:
        model = load_model_file(args.model)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ts = build_threshold_sets(model)
    n_boxes = count_boxes(ts)
    exceeds = n_boxes > 2**63 - 1
    report = {
        "model": str(args.model),
        "type": model.kind,
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "n_trees": model.n_trees,
        "max_depth": max(_tree_depth(t) for t in model.trees),
        "thresholds_per_feature": [len(t) for t in ts.tau],
        "n_boxes": str(n_boxes) if exceeds else n_boxes,
        "n_boxes_exceeds_int64": exceeds,
    }
    sys.stdout.write(json.dumps(report, indent=2) + "\n")
    return 0


def _add_io_arguments(p: argparse.ArgumentParser, with_samples: bool = True) -> None:
    p.add_argument("--model", required=True, help="model JSON path")
    if with_samples:
        p.add_argument("--samples", required=True, help="samples CSV path")
        p.add_argument("--uncertainty", required=True, help="uncertainty JSON path")
        p.add_argument("--prune-level", type=float, default=0.99,
                       help="confidence level for pruned runs (default 0.99)")
        p.add_argument("--mc-samples", type=int, default=1_000_000,
                       help="Monte-Carlo sample count (default 1000000)")
        p.add_argument("--seed", type=int, default=0,
                       help="base seed; per-sample seeds derive from it (default 0)")
        p.add_argument("--abs-tol", type=float, default=1e-6,
                       help="integrator absolute tolerance (default 1e-6)")
        p.add_argument("--max-boxes", type=int, default=10_000_000,
                       help="box-evaluation budget per run (default 10^7)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--verbose", action="store_true",
                       help="include per-box masses (JSON format only)")
        p.add_argument("--omit-timings", action="store_true",
                       help="drop wall_time_ms fields (byte-stable reports)")
        p.add_argument("--output", default=None, help="write report here instead of stdout")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="boxprob",
        description="Exact probabilistic robustness of tree-based classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_compute = sub.add_parser(
        "compute", help="robustness of each sample under one method")
    _add_io_arguments(p_compute)
    p_compute.add_argument("--method", default="full",
                           help="full | pruned[:level] | mc[:n] (default full)")

    p_compare = sub.add_parser(
        "compare", help="run several methods and report agreement")
    _add_io_arguments(p_compare)
    p_compare.add_argument("--method", action="append", dest="methods",
                           metavar="METHOD", default=None,
                           help="repeatable: full | pruned[:level] | mc[:n] "
                                "(at least two)")

    p_inspect = sub.add_parser("inspect", help="model summary and partition size")
    _add_io_arguments(p_inspect, with_samples=False)

    args = parser.parse_args(argv)
    if args.command == "inspect":
        return _cmd_inspect(args)
    try:
        if args.command == "compute":
            methods = [_parse_method(args.method, args)]
        else:
            if not args.methods or len(args.methods) < 2:
                raise ValueError("compare needs at least two --method values")
            methods = [_parse_method(t, args) for t in args.methods]
    except ValueError as exc:
        parser.error(str(exc))
    if args.verbose and args.format != "json":
        parser.error("--verbose requires --format json")
    if not 0 <= args.seed < 2**64:
        parser.error("--seed must fit an unsigned 64-bit integer")
    return _cmd_compute_like(args, methods)


if __name__ == "__main__":
    sys.exit(main())
