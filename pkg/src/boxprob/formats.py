"""File formats consumed by the command line: models, samples, uncertainty.

Samples are CSV, one sample per row, comma-separated floats, with an
optional header row (detected by failing to parse as numbers).

Uncertainty files are JSON: either a single specification object
applied to every sample or a list with one object per sample.  Two
kinds exist:

- ``{"kind": "mvn", "mean": [...], "cov": [[...]]}`` - Gaussian noise
  added to the sample; ``mean`` is the (usually zero) offset of the
  perturbation and may be omitted.
- ``{"kind": "norta", "marginals": [{"family": ..., ...}, ...],
  "spearman": [[...]], "additive": false}`` - correlated non-normal
  uncertainty.  By default the marginals describe the perturbed value
  itself; with ``"additive": true`` they describe noise added to the
  sample (their location is shifted by the sample coordinate).

Marginal parameter names per family: normal(mean, sd),
lognormal(mu, sigma[, loc]), exponential(rate[, loc]),
chi_square(df[, loc, scale]), uniform(low, high).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import Model, parse_model
from .mvn import Gaussian
from .norta import MarginalDistribution, NortaModel
from .robustness import UncertaintyModel

__all__ = [
    "UncertaintySpec",
    "load_model_file",
    "load_samples_file",
    "load_uncertainty_file",
]


def load_model_file(path: str | Path) -> Model:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_model(text)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def load_samples_file(path: str | Path) -> np.ndarray:
    """Parse a samples CSV into an (m, n) float array.

    The first row may be a header; it is skipped when any of its cells
    fails to parse as a float.  All data rows must have equal width.
    """
    rows: list[list[float]] = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ValueError(
                    f"{path}:{lineno}: non-numeric cell in data row") from None
            if any(not np.isfinite(v) for v in values):
                raise ValueError(f"{path}:{lineno}: sample coordinates must be finite")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(
                    f"{path}:{lineno}: row has {len(values)} columns, "
                    f"expected {width}")
            rows.append(values)
    if not rows:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=np.float64)


@dataclass(frozen=True)
class UncertaintySpec:
    """A parsed uncertainty entry, resolvable against a concrete sample."""

    kind: str
    gaussian_offset: np.ndarray | None = None
    gaussian_cov: np.ndarray | None = None
    norta_base: NortaModel | None = None
    norta_additive: bool = False

    def resolve(self, sample: np.ndarray) -> UncertaintyModel:
        """The perturbed-value distribution for this sample."""
        if self.kind == "mvn":
            return Gaussian(sample + self.gaussian_offset, self.gaussian_cov)
        if self.norta_additive:
            return self.norta_base.shifted(sample)
        return self.norta_base

    @property
    def n_dim(self) -> int:
        if self.kind == "mvn":
            return len(self.gaussian_offset)
        return self.norta_base.n_dim


def _parse_uncertainty_entry(doc: object, where: str, n_features: int) -> UncertaintySpec:
    if not isinstance(doc, dict):
        raise ValueError(f"{where}: uncertainty entry must be an object")
    kind = doc.get("kind")
    if kind == "mvn":
        if "cov" not in doc:
            raise ValueError(f'{where}: mvn entry missing "cov"')
        cov = np.asarray(doc["cov"], dtype=np.float64)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"{where}: cov must be a square matrix")
        n = cov.shape[0]
        mean = np.zeros(n)
        if doc.get("mean") is not None:
            mean = np.asarray(doc["mean"], dtype=np.float64)
            if mean.shape != (n,):
                raise ValueError(
                    f"{where}: mean length {mean.shape} does not match cov size {n}")
        if n != n_features:
            raise ValueError(
                f"{where}: uncertainty has {n} dimensions, model has {n_features}")
        # validate PD/symmetry once, against a zero sample
        Gaussian(mean, cov)
        return UncertaintySpec(kind="mvn", gaussian_offset=mean, gaussian_cov=cov)
    if kind == "norta":
        for key in ("marginals", "spearman"):
            if key not in doc:
                raise ValueError(f'{where}: norta entry missing "{key}"')
        marginals_doc = doc["marginals"]
        if not isinstance(marginals_doc, list) or not marginals_doc:
            raise ValueError(f'{where}: "marginals" must be a non-empty array')
        marginals = []
        for i, mdoc in enumerate(marginals_doc):
            if not isinstance(mdoc, dict) or "family" not in mdoc:
                raise ValueError(f'{where}.marginals[{i}]: needs a "family" field')
            params = {k: v for k, v in mdoc.items() if k != "family"}
            try:
                marginals.append(MarginalDistribution(mdoc["family"], params))
            except ValueError as exc:
                raise ValueError(f"{where}.marginals[{i}]: {exc}") from exc
        spearman = np.asarray(doc["spearman"], dtype=np.float64)
        additive = bool(doc.get("additive", False))
        try:
            base = NortaModel(tuple(marginals), spearman)
        except ValueError as exc:
            raise ValueError(f"{where}: {exc}") from exc
        if base.n_dim != n_features:
            raise ValueError(
                f"{where}: uncertainty has {base.n_dim} dimensions, "
                f"model has {n_features}")
        return UncertaintySpec(kind="norta", norta_base=base, norta_additive=additive)
    raise ValueError(
        f'{where}: unknown uncertainty kind {kind!r} (expected "mvn" or "norta")')


def load_uncertainty_file(path: str | Path, n_features: int,
                          n_samples: int) -> list[UncertaintySpec]:
    """Parse the uncertainty JSON into one spec per sample.

    A single object is replicated across samples; a list must have
    exactly one entry per sample.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    if isinstance(doc, list):
        if len(doc) != n_samples:
            raise ValueError(
                f"{path}: uncertainty list has {len(doc)} entries for "
                f"{n_samples} samples")
        return [_parse_uncertainty_entry(entry, f"{path}[{i}]", n_features)
                for i, entry in enumerate(doc)]
    spec = _parse_uncertainty_entry(doc, str(path), n_features)
    return [spec] * n_samples
