"""Exact probabilistic robustness of tree-based classifiers.

A tree ensemble partitions its input space into axis-aligned boxes on
which the predicted label is constant.  Given a distribution describing
random input distortions, the probability that a sample keeps its label
is therefore a finite sum of box probabilities.  This package builds
that partition, integrates a multivariate normal (or a NORTA-coupled
non-normal distribution) over the boxes, and reports the resulting
robustness exactly up to integration tolerance.
"""

from .boxes import (
    Box,
    ThresholdSets,
    build_threshold_sets,
    count_boxes,
    enumerate_boxes,
    representative_point,
)
from .mc import McEstimate, mc_robustness
from .models import (
    Model,
    ModelFormatError,
    Tree,
    classify,
    classify_batch,
    iter_split_rules,
    parse_model,
    serialize_model,
)
from .mvn import (
    Gaussian,
    IntegratorConfig,
    ProbEstimate,
    confidence_bounding_box,
    mvn_rectangle_probability,
    univariate_normal_cdf,
)
from .norta import (
    MarginalDistribution,
    NortaModel,
    build_transformed_gaussian,
    sample_norta,
    spearman_to_pearson,
    transform_box_bounds,
)
from .robustness import (
    BoxBudgetError,
    Query,
    RobustnessReport,
    compute_robustness,
    compute_robustness_independent,
    prune_error_bound,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "BoxBudgetError",
    "Gaussian",
    "IntegratorConfig",
    "MarginalDistribution",
    "McEstimate",
    "Model",
    "ModelFormatError",
    "NortaModel",
    "ProbEstimate",
    "Query",
    "RobustnessReport",
    "ThresholdSets",
    "Tree",
    "build_threshold_sets",
    "build_transformed_gaussian",
    "classify",
    "classify_batch",
    "compute_robustness",
    "compute_robustness_independent",
    "confidence_bounding_box",
    "count_boxes",
    "enumerate_boxes",
    "iter_split_rules",
    "mc_robustness",
    "mvn_rectangle_probability",
    "parse_model",
    "prune_error_bound",
    "representative_point",
    "sample_norta",
    "serialize_model",
    "spearman_to_pearson",
    "transform_box_bounds",
    "univariate_normal_cdf",
]
