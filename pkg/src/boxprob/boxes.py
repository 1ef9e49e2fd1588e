"""Feature-space partition induced by tree split thresholds.

Collecting every split threshold per feature, sorting and deduplicating
them, yields per-feature interval grids whose Cartesian product
partitions the input space into axis-aligned boxes.  The classifier is
constant on each box interior, so integrals over the input distribution
reduce to sums over boxes.  The number of boxes is the product
prod_i (|tau_i| + 1), which grows multiplicatively; enumeration is
therefore lazy and supports restriction to a query region.

Boxes are half-open, (lower_i, upper_i] per dimension, mirroring the
"<= goes left" split convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .models import Model, iter_split_rules

__all__ = [
    "Box",
    "ThresholdSets",
    "build_threshold_sets",
    "count_boxes",
    "enumerate_boxes",
    "representative_point",
]

BoxIndex = tuple[int, ...]


@dataclass(frozen=True)
class Box:
    """Axis-aligned hyperrectangle with semantics (lower_i, upper_i].

    Entries of ``lower`` may be -inf and entries of ``upper`` +inf;
    every dimension must satisfy lower_i < upper_i.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError(f"bound shapes differ: {lower.shape} vs {upper.shape}")
        if np.isnan(lower).any() or np.isnan(upper).any():
            raise ValueError("box bounds must not contain NaN")
        if not (lower < upper).all():
            bad = int(np.nonzero(~(lower < upper))[0][0])
            raise ValueError(
                f"box requires lower < upper in every dimension; "
                f"dimension {bad} has [{lower[bad]}, {upper[bad]}]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_dim(self) -> int:
        return len(self.lower)

    def contains(self, point: np.ndarray) -> bool:
        point = np.asarray(point, dtype=np.float64)
        return bool(((self.lower < point) & (point <= self.upper)).all())


@dataclass(frozen=True)
class ThresholdSets:
    """Per-feature sorted threshold arrays and their bound-expanded form.

    ``tau[i]`` holds the strictly increasing deduplicated thresholds of
    feature i; ``tau_expanded[i]`` is ``tau[i]`` with the feature's
    lower/upper bound (or -inf/+inf) prepended/appended, so consecutive
    entries delimit the feature's intervals.
    """

    tau: tuple[np.ndarray, ...]
    tau_expanded: tuple[np.ndarray, ...]

    @property
    def n_features(self) -> int:
        return len(self.tau)

    @property
    def interval_counts(self) -> tuple[int, ...]:
        return tuple(len(t) + 1 for t in self.tau)


def build_threshold_sets(model: Model) -> ThresholdSets:
    """Collect, deduplicate (exact float equality), and sort thresholds.

    Features without split rules get an empty tau and a two-entry
    expansion.  Declared feature bounds replace the infinities; a
    threshold at or outside its feature's bounds is an inconsistency
    and raises ValueError.
    """
    per_feature: list[list[float]] = [[] for _ in range(model.n_features)]
    for feature, threshold in iter_split_rules(model):
        per_feature[feature].append(threshold)

    tau: list[np.ndarray] = []
    tau_expanded: list[np.ndarray] = []
    for i in range(model.n_features):
        values = np.unique(np.asarray(per_feature[i], dtype=np.float64))
        lo, hi = -np.inf, np.inf
        if model.feature_bounds is not None and model.feature_bounds[i] is not None:
            lo, hi = model.feature_bounds[i]
        if values.size and not ((values > lo) & (values < hi)).all():
            bad = values[~((values > lo) & (values < hi))][0]
            raise ValueError(
                f"feature {i}: threshold {bad!r} lies outside the declared "
                f"feature bounds ({lo}, {hi})")
        tau.append(values)
        tau_expanded.append(np.concatenate(([lo], values, [hi])))
    return ThresholdSets(tau=tuple(tau), tau_expanded=tuple(tau_expanded))


def count_boxes(ts: ThresholdSets) -> int:
    """Total box count prod_i (|tau_i| + 1) as an exact (big) integer."""
    return math.prod(len(t) + 1 for t in ts.tau)


def _index_ranges(ts: ThresholdSets, region: Box | None) -> list[range] | None:
    """Per-dimension interval index ranges whose boxes' closures intersect
    the region's closure; None signals an empty intersection."""
    if region is None:
        return [range(len(t) + 1) for t in ts.tau]
    if region.n_dim != ts.n_features:
        raise ValueError(
            f"region has {region.n_dim} dimensions, threshold sets have {ts.n_features}")
    ranges: list[range] = []
    for i, exp in enumerate(ts.tau_expanded):
        uppers = exp[1:]
        lowers = exp[:-1]
        # closure of box k is [lowers[k], uppers[k]]; it meets
        # [region.lower_i, region.upper_i] iff uppers[k] >= region.lower_i
        # and lowers[k] <= region.upper_i
        first = int(np.searchsorted(uppers, region.lower[i], side="left"))
        last = int(np.searchsorted(lowers, region.upper[i], side="right")) - 1
        if last < first:
            return None
        ranges.append(range(first, last + 1))
    return ranges


def _box_bounds(ts: ThresholdSets, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper bound matrices for a (m, N) block of interval indices."""
    m, n = indices.shape
    lower = np.empty((m, n), dtype=np.float64)
    upper = np.empty((m, n), dtype=np.float64)
    for i in range(n):
        exp = ts.tau_expanded[i]
        lower[:, i] = exp[indices[:, i]]
        upper[:, i] = exp[indices[:, i] + 1]
    return lower, upper


def _iter_index_blocks(ranges: Sequence[range], block_size: int) -> Iterator[np.ndarray]:
    """Yield (m, N) blocks of interval indices in lexicographic order.

    Decodes flat ordinals through the mixed-radix system given by the
    range sizes, so memory stays O(N + block_size) however many boxes
    the product contains.
    """
    sizes = [len(r) for r in ranges]
    starts = np.asarray([r.start for r in ranges], dtype=np.int64)
    total = math.prod(sizes)
    # place value of each dimension in the lexicographic ordering
    weights = list(itertools.accumulate(reversed(sizes[1:] + [1]), lambda a, b: a * b))
    weights.reverse()
    small = total < 2**62  # ordinals fit in int64, so decode vectorized
    dtype = np.int64 if small else object
    weights_arr = np.asarray(weights, dtype=dtype)
    sizes_arr = np.asarray(sizes, dtype=dtype)
    ordinal = 0
    while ordinal < total:
        m = min(block_size, total - ordinal)
        flat = np.arange(ordinal, ordinal + m, dtype=dtype)
        digits = (flat[:, None] // weights_arr[None, :]) % sizes_arr[None, :]
        yield starts[None, :] + digits.astype(np.int64)
        ordinal += m


def enumerate_boxes(ts: ThresholdSets, region: Box | None = None
                    ) -> Iterator[tuple[BoxIndex, Box]]:
    """Lazily yield (BoxIndex, Box) pairs in lexicographic index order.

    Without a region this covers the whole partition.  With a region it
    yields exactly the boxes whose closure intersects the region's
    closure, found by per-dimension binary search; memory use is O(N).
    """
    ranges = _index_ranges(ts, region)
    if ranges is None:
        return
    for indices in _iter_index_blocks(ranges, block_size=4096):
        lower, upper = _box_bounds(ts, indices)
        for row in range(indices.shape[0]):
            yield tuple(int(k) for k in indices[row]), Box(lower[row], upper[row])


def _representative_points(lower: np.ndarray, upper: np.ndarray,
                           fallback: np.ndarray) -> np.ndarray:
    """Vectorized interior points for (m, N) bound matrices."""
    lo_fin = np.isfinite(lower)
    up_fin = np.isfinite(upper)
    lo_safe = np.where(lo_fin, lower, 0.0)
    up_safe = np.where(up_fin, upper, 0.0)
    mid = 0.5 * (lo_safe + up_safe)
    delta_up = np.maximum(1.0, np.abs(up_safe) * 2.0**-10)
    delta_lo = np.maximum(1.0, np.abs(lo_safe) * 2.0**-10)
    points = np.where(
        lo_fin & up_fin, mid,
        np.where(~lo_fin & up_fin, up_safe - delta_up,
                 np.where(lo_fin & ~up_fin, lo_safe + delta_lo,
                          np.clip(fallback, lower, upper))))
    return points


def representative_point(box: Box, fallback: np.ndarray | Sequence[float] | None = None
                         ) -> np.ndarray:
    """A point in the box interior, used to read off the box's label.

    Midpoint when both bounds are finite; a delta-offset inside the
    finite bound when only one is; the fallback coordinate (clamped)
    when neither is.  delta = max(1, |finite bound| * 2^-10).
    """
    if fallback is None:
        fallback = np.zeros(box.n_dim)
    fallback = np.asarray(fallback, dtype=np.float64)
    if fallback.shape != box.lower.shape:
        raise ValueError(
            f"fallback shape {fallback.shape} does not match box dimension {box.n_dim}")
    if not np.isfinite(fallback).all():
        raise ValueError("fallback must be finite")
    return _representative_points(box.lower[None, :], box.upper[None, :], fallback)[0]
