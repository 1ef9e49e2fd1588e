"""Monte-Carlo robustness oracle.

Estimates the same quantity as the exact engine by brute force: draw
perturbed inputs from the uncertainty model, classify them, and report
the fraction that keeps the sample's label.  Used as an independent
reference in tests and available from the CLI as a method of its own.

Sampling is sharded into fixed-size blocks with counter-based sub-seeds
(SeedSequence of (seed, shard index)), so the estimate is bit-identical
no matter how the shards would be scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import Model, classify, classify_batch
from .mvn import Gaussian
from .norta import NortaModel, _sample_with_rng
from .robustness import Query

__all__ = ["McEstimate", "mc_robustness"]

_SHARD = 1 << 17


@dataclass(frozen=True)
class McEstimate:
    """Sampled robustness with its binomial standard error.

    ``std_error`` is sqrt(p(1-p)/n) with a floor of 1/n when the
    estimate is degenerate (p in {0, 1}), avoiding zero-width intervals.
    """

    robustness_hat: float
    std_error: float
    n_samples: int
    seed: int


def mc_robustness(model: Model, q: Query, n: int, seed: int = 0) -> McEstimate:
    """Fraction of n perturbed samples classified like the sample itself.

    Gaussian uncertainty draws mean + L z with the Cholesky factor L;
    NORTA uncertainty draws through the copula transform.  Deterministic
    for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"sample count must be at least 1, got {n}")
    if model.n_features != q.sample.shape[0]:
        raise ValueError(
            f"model expects {model.n_features} features but the query has "
            f"{q.sample.shape[0]}")
    label = classify(model, q.sample)
    unc = q.uncertainty
    is_norta = isinstance(unc, NortaModel)

    matches = 0
    done = 0
    shard = 0
    while done < n:
        take = min(_SHARD, n - done)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), shard]))
        if is_norta:
            points = _sample_with_rng(unc, take, rng)
        else:
            z = rng.standard_normal((take, unc.n_dim))
            points = unc.mean + z @ unc.chol.T
        matches += int((classify_batch(model, points) == label).sum())
        done += take
        shard += 1

    p_hat = matches / n
    if 0.0 < p_hat < 1.0:
        se = math.sqrt(p_hat * (1.0 - p_hat) / n)
    else:
        se = 1.0 / n
    return McEstimate(robustness_hat=p_hat, std_error=se, n_samples=n, seed=int(seed))
