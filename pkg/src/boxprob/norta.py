"""Correlated non-normal uncertainty via the Gaussian copula (NORTA).

A NORTA model couples arbitrary continuous marginals with a Spearman
rank-correlation matrix.  Sampling ("normal to anything") draws a
correlated standard normal vector and pushes each coordinate through
Phi and the marginal quantile.  This module also runs the construction
in reverse: box boundaries in feature space are mapped into standard
normal space via z = Phi^-1(F_i(bound)), so rectangle probabilities
can be computed under the transformed Gaussian whose correlations are
the Spearman entries converted by R = 2*sin(rho*pi/6), the exact
rank-to-linear relation under a Gaussian copula.

Bounds at or beyond a marginal's support map to -inf/+inf rather than
erroring; a box that covers a whole support therefore drops out of
integration entirely, which is how "robustness exactly 1" cases arise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from .boxes import Box
from .mvn import Gaussian

__all__ = [
    "MarginalDistribution",
    "NortaModel",
    "build_transformed_gaussian",
    "marginal_cdf",
    "marginal_quantile",
    "sample_norta",
    "spearman_to_pearson",
    "transform_box_bounds",
]

# family name -> (required params, optional params with defaults)
_FAMILIES: dict[str, tuple[tuple[str, ...], dict[str, float]]] = {
    "normal": (("mean", "sd"), {}),
    "lognormal": (("mu", "sigma"), {"loc": 0.0}),
    "exponential": (("rate",), {"loc": 0.0}),
    "chi_square": (("df",), {"loc": 0.0, "scale": 1.0}),
    "uniform": (("low", "high"), {}),
}


@dataclass(frozen=True)
class MarginalDistribution:
    """One feature's perturbed-value distribution.

    Families and parameters (all in feature units):

    - ``normal``: mean, sd (> 0)
    - ``lognormal``: mu, sigma (> 0) of the underlying normal, optional loc
    - ``exponential``: rate (> 0), optional loc
    - ``chi_square``: df (> 0), optional loc, scale (> 0)
    - ``uniform``: low, high (low < high)

    The location parameter describes the perturbed value itself; shift
    by the sample beforehand when the marginal models additive noise.
    """

    family: str
    params: dict[str, float]
    _dist: object = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(
                f"unknown marginal family {self.family!r} "
                f"(expected one of {sorted(_FAMILIES)})")
        required, optional = _FAMILIES[self.family]
        unknown = set(self.params) - set(required) - set(optional)
        if unknown:
            raise ValueError(f"{self.family}: unknown parameters {sorted(unknown)}")
        missing = set(required) - set(self.params)
        if missing:
            raise ValueError(f"{self.family}: missing parameters {sorted(missing)}")
        p = {**optional, **{k: float(v) for k, v in self.params.items()}}
        if not all(math.isfinite(v) for v in p.values()):
            raise ValueError(f"{self.family}: parameters must be finite, got {p}")
        if self.family == "normal":
            if p["sd"] <= 0:
                raise ValueError(f"normal: sd must be positive, got {p['sd']}")
            dist = stats.norm(loc=p["mean"], scale=p["sd"])
        elif self.family == "lognormal":
            if p["sigma"] <= 0:
                raise ValueError(f"lognormal: sigma must be positive, got {p['sigma']}")
            dist = stats.lognorm(s=p["sigma"], scale=math.exp(p["mu"]), loc=p["loc"])
        elif self.family == "exponential":
            if p["rate"] <= 0:
                raise ValueError(f"exponential: rate must be positive, got {p['rate']}")
            dist = stats.expon(loc=p["loc"], scale=1.0 / p["rate"])
        elif self.family == "chi_square":
            if p["df"] <= 0:
                raise ValueError(f"chi_square: df must be positive, got {p['df']}")
            if p["scale"] <= 0:
                raise ValueError(f"chi_square: scale must be positive, got {p['scale']}")
            dist = stats.chi2(p["df"], loc=p["loc"], scale=p["scale"])
        else:
            if not p["low"] < p["high"]:
                raise ValueError(f"uniform: requires low < high, got {p}")
            dist = stats.uniform(loc=p["low"], scale=p["high"] - p["low"])
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "_dist", dist)

    def cdf(self, x):
        """F(x); 0 below the support, 1 above; accepts arrays and +-inf."""
        return self._dist.cdf(x)

    def quantile(self, p):
        """F^-1(p) by inversion; p in [0, 1], edges give the support ends."""
        return self._dist.ppf(p)

    def shifted(self, offset: float) -> "MarginalDistribution":
        """The distribution of (X + offset): location moved by offset."""
        p = dict(self.params)
        if self.family == "normal":
            p["mean"] += offset
        elif self.family == "uniform":
            p["low"] += offset
            p["high"] += offset
        else:
            p["loc"] += offset
        return MarginalDistribution(self.family, p)


def marginal_cdf(m: MarginalDistribution, x):
    return m.cdf(x)


def marginal_quantile(m: MarginalDistribution, p):
    return m.quantile(p)


def spearman_to_pearson(rho):
    """Exact Gaussian-copula conversion R = 2*sin(rho*pi/6).

    Odd, strictly increasing, and maps [-1, 1] onto [-1, 1].
    """
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(np.abs(rho) > 1.0):
        raise ValueError("rank correlation entries must lie in [-1, 1]")
    out = 2.0 * np.sin(rho * (np.pi / 6.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NortaModel:
    """Continuous marginals coupled by a Spearman rank-correlation matrix.

    The converted Pearson matrix (unit diagonal, off-diagonals
    2*sin(rho*pi/6)) must be positive definite; this is checked eagerly
    and violations are a hard error, never silently repaired.
    """

    marginals: tuple[MarginalDistribution, ...]
    spearman: np.ndarray

    def __post_init__(self) -> None:
        marginals = tuple(self.marginals)
        if not marginals:
            raise ValueError("at least one marginal is required")
        spearman = np.atleast_2d(np.asarray(self.spearman, dtype=np.float64))
        n = len(marginals)
        if spearman.shape != (n, n):
            raise ValueError(
                f"spearman shape {spearman.shape} does not match {n} marginals")
        if not np.array_equal(spearman, spearman.T):
            raise ValueError("spearman matrix must be symmetric")
        if not np.allclose(np.diag(spearman), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("spearman matrix must have a unit diagonal")
        if np.any(np.abs(spearman) > 1.0):
            raise ValueError("spearman entries must lie in [-1, 1]")
        object.__setattr__(self, "marginals", marginals)
        object.__setattr__(self, "spearman", spearman)
        # eager PD check of the converted matrix
        build_transformed_gaussian(self)

    @property
    def n_dim(self) -> int:
        return len(self.marginals)

    def shifted(self, offsets) -> "NortaModel":
        """Per-dimension location shifts (additive-noise to absolute form)."""
        offsets = np.asarray(offsets, dtype=np.float64)
        if offsets.shape != (self.n_dim,):
            raise ValueError(
                f"offsets shape {offsets.shape} does not match dimension {self.n_dim}")
        marginals = tuple(m.shifted(float(o)) for m, o in zip(self.marginals, offsets))
        return NortaModel(marginals, self.spearman)


def build_transformed_gaussian(n: NortaModel) -> Gaussian:
    """The copula Gaussian: zero mean, unit diagonal, converted correlations."""
    cov = spearman_to_pearson(n.spearman)
    np.fill_diagonal(cov, 1.0)
    try:
        return Gaussian(np.zeros(n.n_dim), cov)
    except ValueError as exc:
        smallest = float(np.linalg.eigvalsh(cov)[0])
        raise ValueError(
            "converted correlation matrix is not positive definite "
            f"(smallest eigenvalue {smallest:.6g})") from exc


def transform_box_bounds(n: NortaModel, box: Box) -> tuple[np.ndarray, np.ndarray]:
    """Map box bounds into standard normal space: z = Phi^-1(F_i(bound)).

    Bounds at or below a marginal's support map to -inf, at or above it
    to +inf.  The per-dimension maps are strictly increasing on the
    support, so nested boxes give nested z-intervals.
    """
    if box.n_dim != n.n_dim:
        raise ValueError(f"box dimension {box.n_dim} does not match model {n.n_dim}")
    z_lower = np.empty(n.n_dim)
    z_upper = np.empty(n.n_dim)
    for i, m in enumerate(n.marginals):
        z_lower[i] = ndtri(m.cdf(box.lower[i])) if np.isfinite(box.lower[i]) else -np.inf
        z_upper[i] = ndtri(m.cdf(box.upper[i])) if np.isfinite(box.upper[i]) else np.inf
    return z_lower, z_upper


def _sample_with_rng(n: NortaModel, count: int, rng: np.random.Generator) -> np.ndarray:
    g = build_transformed_gaussian(n)
    z = rng.standard_normal((count, n.n_dim)) @ g.chol.T
    u = ndtr(z)
    out = np.empty_like(u)
    for i, m in enumerate(n.marginals):
        out[:, i] = m.quantile(u[:, i])
    return out


def sample_norta(n: NortaModel, count: int, seed: int = 0) -> np.ndarray:
    """Draw ``count`` vectors: correlated normals pushed through the
    marginal quantiles.  Deterministic for a fixed seed."""
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    return _sample_with_rng(n, count, np.random.default_rng(int(seed)))
