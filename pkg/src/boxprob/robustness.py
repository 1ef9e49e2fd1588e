"""Exact probabilistic robustness of a sample under input uncertainty.

The classifier's threshold partition makes the robustness a finite sum:
R = sum of P(X in box) over the boxes whose label matches the sample's.
This module orchestrates that computation: label the sample, stream the
(optionally pruned) box partition, label each box by a representative
point, and integrate the uncertainty over the matching boxes.

Two uncertainty families are supported: a multivariate normal,
integrated directly over box bounds, and a NORTA model (arbitrary
continuous marginals coupled by rank correlation), for which box bounds
are first transformed into standard normal space where the copula
Gaussian lives.

Pruning restricts enumeration to boxes touching the axis-aligned
bounding box of the level-q confidence ellipsoid; the neglected mass is
at most 1 - level.  Pruned runs integrate intersecting boxes over their
full extent, so pruning can only under-count: 0 <= full - pruned <=
1 - level.

Masses are accumulated with exact compensated summation (math.fsum) of
the integrator's raw CDF terms, so results are independent of
evaluation order and adjacent one-dimensional masses telescope without
rounding: a sample whose whole uncertainty support shares one label
comes out at exactly 1.0.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import chi2

from .boxes import (
    ThresholdSets,
    _box_bounds,
    _iter_index_blocks,
    _representative_points,
    build_threshold_sets,
    count_boxes,
)
from .models import Model, classify, classify_batch
from .mvn import Gaussian, IntegratorConfig, _rectangle_terms
from .norta import NortaModel, build_transformed_gaussian

__all__ = [
    "BoxBudgetError",
    "Query",
    "RobustnessReport",
    "UncertaintyModel",
    "compute_robustness",
    "compute_robustness_independent",
    "prune_error_bound",
]

UncertaintyModel = Union[Gaussian, NortaModel]

_BLOCK = 65536


class BoxBudgetError(RuntimeError):
    """The box stream would exceed the evaluation budget."""

    def __init__(self, n_stream: int, budget: int, n_total: int):
        self.n_stream = n_stream
        self.budget = budget
        self.n_total = n_total
        super().__init__(
            f"box stream of {n_stream} boxes exceeds the evaluation budget of "
            f"{budget} (the full partition has {n_total} boxes); enable pruning, "
            f"tighten prune_level, or raise max_boxes")


@dataclass(frozen=True)
class Query:
    """One robustness question: a sample and its uncertainty model.

    The uncertainty describes the distribution of the perturbed input
    itself (already located at the sample; shift beforehand for
    additive noise).  ``prune_level`` of None integrates the whole
    partition; a level in (0, 1) restricts to the confidence-ellipsoid
    bounding box with neglected mass <= 1 - level.  ``max_boxes``
    caps how many boxes a run may stream before aborting.
    """

    sample: np.ndarray
    uncertainty: UncertaintyModel
    prune_level: float | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    max_boxes: int = 10_000_000
    collect_box_masses: bool = False

    def __post_init__(self) -> None:
        sample = np.atleast_1d(np.asarray(self.sample, dtype=np.float64))
        if sample.ndim != 1:
            raise ValueError(f"sample must be a vector, got shape {sample.shape}")
        if not np.isfinite(sample).all():
            raise ValueError("sample coordinates must be finite")
        if sample.shape[0] != self.uncertainty.n_dim:
            raise ValueError(
                f"sample has {sample.shape[0]} coordinates but the uncertainty "
                f"model has {self.uncertainty.n_dim}")
        if self.prune_level is not None and not 0.0 < self.prune_level < 1.0:
            raise ValueError(f"prune_level must be in (0, 1), got {self.prune_level}")
        if self.max_boxes < 1:
            raise ValueError(f"max_boxes must be positive, got {self.max_boxes}")
        object.__setattr__(self, "sample", sample)


@dataclass(frozen=True)
class RobustnessReport:
    """Result and diagnostics of one robustness computation.

    ``robustness`` is the clamped-[0,1] value; ``raw_sum`` is the
    unclamped mass sum so clamping stays auditable.  ``integration_err``
    sums the per-box error estimates; ``prune_error_bound`` is 0 for
    unpruned runs and 1 - prune_level otherwise.  ``box_masses`` holds
    per-box (index, mass) pairs when the query asked for them.
    """

    label: int
    robustness: float
    misclassification_probability: float
    raw_sum: float
    boxes_enumerated: int
    boxes_matching: int
    integration_err: float
    prune_error_bound: float
    wall_time: float
    converged: bool
    points_used: int
    box_masses: tuple[tuple[tuple[int, ...], float], ...] | None = None


def prune_error_bound(level: float) -> float:
    """Upper bound on the mass neglected by pruning at this level."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"prune level must be in (0, 1), got {level}")
    return 1.0 - level


def _box_seed(base_seed: int, index_row: np.ndarray) -> int:
    """Independent per-box integrator seed derived from the box index."""
    ss = np.random.SeedSequence([int(base_seed)] + [int(k) for k in index_row])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _z_expanded(ts: ThresholdSets, norta: NortaModel) -> list[np.ndarray]:
    """Expanded threshold grids mapped into standard normal space.

    Thresholds at or outside a marginal's support saturate to the same
    +-inf, collapsing the intervals beyond the support to zero width.
    """
    grids: list[np.ndarray] = []
    for i, m in enumerate(norta.marginals):
        exp = ts.tau_expanded[i]
        z = np.empty_like(exp)
        finite = np.isfinite(exp)
        z[finite] = ndtri(m.cdf(exp[finite]))
        z[~finite] = exp[~finite]
        grids.append(z)
    return grids


def _ranges_for_grids(grids: list[np.ndarray], lower: np.ndarray,
                      upper: np.ndarray) -> list[range] | None:
    """Interval index ranges intersecting [lower, upper] per dimension."""
    ranges: list[range] = []
    for i, exp in enumerate(grids):
        first = int(np.searchsorted(exp[1:], lower[i], side="left"))
        last = int(np.searchsorted(exp[:-1], upper[i], side="right")) - 1
        if last < first:
            return None
        ranges.append(range(first, last + 1))
    return ranges


def _gather_bounds(grids: list[np.ndarray], indices: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    m, n = indices.shape
    lower = np.empty((m, n))
    upper = np.empty((m, n))
    for i in range(n):
        lower[:, i] = grids[i][indices[:, i]]
        upper[:, i] = grids[i][indices[:, i] + 1]
    return lower, upper


def _run(model: Model, q: Query, independent: bool) -> RobustnessReport:
    t_start = time.perf_counter()
    if model.n_features != q.sample.shape[0]:
        raise ValueError(
            f"model expects {model.n_features} features but the query has "
            f"{q.sample.shape[0]}")

    unc = q.uncertainty
    is_norta = isinstance(unc, NortaModel)
    if independent:
        if is_norta:
            off = unc.spearman[~np.eye(unc.n_dim, dtype=bool)]
            if np.any(off != 0.0):
                raise ValueError(
                    "independent path requires an identity Spearman matrix; "
                    "use compute_robustness for correlated uncertainty")
        else:
            off = unc.cov[~np.eye(unc.n_dim, dtype=bool)]
            if np.any(off != 0.0):
                raise ValueError(
                    "independent path requires a diagonal covariance; "
                    "use compute_robustness for correlated uncertainty")

    label = classify(model, q.sample)
    ts = build_threshold_sets(model)
    n_total = count_boxes(ts)

    # Integration happens over per-dimension grids: the raw threshold
    # grid for Gaussians, its image in standard normal space for NORTA.
    if is_norta:
        int_grids = _z_expanded(ts, unc)
        g_int = build_transformed_gaussian(unc)
    else:
        int_grids = list(ts.tau_expanded)
        g_int = unc

    if q.prune_level is None:
        ranges = [range(len(t) + 1) for t in ts.tau]
        bound = 0.0
    else:
        bound = prune_error_bound(q.prune_level)
        radius_q = chi2.ppf(q.prune_level, df=unc.n_dim)
        if is_norta:
            # ellipsoid of the unit-diagonal copula Gaussian, in z-space
            half = math.sqrt(radius_q)
            region_lo = np.full(unc.n_dim, -half)
            region_up = np.full(unc.n_dim, half)
        else:
            half = np.sqrt(radius_q * np.diag(unc.cov))
            region_lo = unc.mean - half
            region_up = unc.mean + half
        ranges = _ranges_for_grids(int_grids, region_lo, region_up)

    if ranges is None:
        n_stream = 0
    else:
        n_stream = math.prod(len(r) for r in ranges)
    if n_stream > q.max_boxes:
        raise BoxBudgetError(n_stream, q.max_boxes, n_total)

    if independent and not is_norta:
        sd = np.sqrt(np.diag(unc.cov))
        cdf_grids = [
            _gaussian_cdf_grid(ts.tau_expanded[i], unc.mean[i], sd[i])
            for i in range(unc.n_dim)
        ]
    elif independent:
        cdf_grids = [_marginal_cdf_grid(ts.tau_expanded[i], m)
                     for i, m in enumerate(unc.marginals)]
    else:
        cdf_grids = None

    terms: list[float] = []
    err_terms: list[float] = []
    boxes_enumerated = 0
    boxes_matching = 0
    points_used = 0
    converged = True
    masses: list[tuple[tuple[int, ...], float]] = []
    base_seed = int(q.integrator.seed)

    if ranges is not None:
        for indices in _iter_index_blocks(ranges, _BLOCK):
            m = indices.shape[0]
            boxes_enumerated += m
            rep_lo, rep_up = _box_bounds(ts, indices)
            reps = _representative_points(rep_lo, rep_up, q.sample)
            match = classify_batch(model, reps) == label
            boxes_matching += int(match.sum())
            if not match.any():
                continue
            rows = np.nonzero(match)[0]
            int_lo, int_up = _gather_bounds(int_grids, indices[rows])
            if cdf_grids is not None:
                _accumulate_independent(
                    cdf_grids, indices[rows], int_lo, int_up, terms,
                    masses if q.collect_box_masses else None)
            else:
                feasible = (int_lo < int_up).all(axis=1)
                for j, row in enumerate(rows):
                    if not feasible[j]:
                        if q.collect_box_masses:
                            masses.append((tuple(int(k) for k in indices[row]), 0.0))
                        continue
                    seed = _box_seed(base_seed, indices[row])
                    est, box_terms = _rectangle_terms(
                        g_int, int_lo[j], int_up[j], q.integrator.with_seed(seed))
                    terms.extend(box_terms)
                    err_terms.append(est.err_estimate)
                    points_used += est.points_used
                    converged = converged and est.converged
                    if q.collect_box_masses:
                        masses.append((tuple(int(k) for k in indices[row]), est.value))

    raw_sum = math.fsum(terms)
    robustness = min(1.0, max(0.0, raw_sum))
    integration_err = math.fsum(err_terms)
    return RobustnessReport(
        label=label,
        robustness=robustness,
        misclassification_probability=1.0 - robustness,
        raw_sum=raw_sum,
        boxes_enumerated=boxes_enumerated,
        boxes_matching=boxes_matching,
        integration_err=integration_err,
        prune_error_bound=bound,
        wall_time=time.perf_counter() - t_start,
        converged=converged,
        points_used=points_used,
        box_masses=tuple(masses) if q.collect_box_masses else None,
    )


def _gaussian_cdf_grid(exp: np.ndarray, mean: float, sd: float) -> np.ndarray:
    out = np.empty_like(exp)
    finite = np.isfinite(exp)
    out[finite] = ndtr((exp[finite] - mean) / sd)
    out[~finite] = np.where(exp[~finite] > 0, 1.0, 0.0)
    return out


def _marginal_cdf_grid(exp: np.ndarray, marginal) -> np.ndarray:
    out = np.empty_like(exp)
    finite = np.isfinite(exp)
    out[finite] = marginal.cdf(exp[finite])
    out[~finite] = np.where(exp[~finite] > 0, 1.0, 0.0)
    return out


def _accumulate_independent(cdf_grids: list[np.ndarray], indices: np.ndarray,
                            int_lo: np.ndarray, int_up: np.ndarray,
                            terms: list[float],
                            masses: list[tuple[tuple[int, ...], float]] | None) -> None:
    """Product-of-CDF-differences masses, with exact one-factor handling.

    Rows where every factor but one equals 1 contribute their two CDF
    values as separate +/- terms, so sums over adjacent boxes telescope
    exactly; other rows contribute their product.
    """
    m, n = indices.shape
    cdf_lo = np.empty((m, n))
    cdf_up = np.empty((m, n))
    for i in range(n):
        cdf_lo[:, i] = cdf_grids[i][indices[:, i]]
        cdf_up[:, i] = cdf_grids[i][indices[:, i] + 1]
    diffs = cdf_up - cdf_lo
    products = diffs.prod(axis=1)
    non_unit = diffs != 1.0
    n_non_unit = non_unit.sum(axis=1)
    for j in range(m):
        if n_non_unit[j] == 0:
            terms.append(1.0)
            mass = 1.0
        elif n_non_unit[j] == 1:
            i = int(np.nonzero(non_unit[j])[0][0])
            terms.append(cdf_up[j, i])
            terms.append(-cdf_lo[j, i])
            mass = max(0.0, cdf_up[j, i] - cdf_lo[j, i])
        else:
            mass = float(products[j])
            if mass != 0.0:
                terms.append(mass)
        if masses is not None:
            masses.append((tuple(int(k) for k in indices[j]), mass))


def compute_robustness(model: Model, q: Query) -> RobustnessReport:
    """Probability that the model's label survives the input uncertainty.

    Works for any supported uncertainty model; box masses come from the
    QMC integrator with per-box seeds derived from the query's base
    seed and the box index, so results are deterministic and
    independent of evaluation order.
    """
    return _run(model, q, independent=False)


def compute_robustness_independent(model: Model, q: Query) -> RobustnessReport:
    """Robustness for independent (uncorrelated) uncertainty.

    Each box mass is the product of per-dimension CDF differences; no
    QMC is involved, so results are exact up to CDF accuracy.  Raises
    ValueError when the uncertainty is correlated.
    """
    return _run(model, q, independent=True)
