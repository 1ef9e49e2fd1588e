"""
Robustness of a single decision tree, box by box
================================================

A decision tree carves the input plane into axis-aligned boxes on
which its label is constant.  Once the perturbed input is modelled as
a multivariate normal around the sample, the probability that the
label survives the perturbation is a finite sum of box probabilities.
This script builds a tiny two-feature tree by hand, prints its box
decomposition with the exact mass of each box, and checks the result
against plain Monte Carlo.

Run it from the repository root:

    python3 demos/01_single_tree_robustness.py
"""

import numpy as np

from boxprob import (
    Gaussian,
    Query,
    build_threshold_sets,
    compute_robustness,
    count_boxes,
    classify,
    mc_robustness,
    parse_model,
)

# ---------------------------------------------------------------------
# 1. A hand-written tree: three splits over two features, three labels.
#    Split rule: x[feature] <= threshold goes to the left child.
# ---------------------------------------------------------------------

model = parse_model({
    "type": "decision_tree",
    "n_features": 2,
    "n_classes": 3,
    "trees": [{
        "nodes": [
            {"feature": 0, "threshold": 0.0, "left": 1, "right": 2},
            {"feature": 1, "threshold": -0.5, "left": 3, "right": 4},
            {"feature": 1, "threshold": 1.0, "left": 5, "right": 6},
            {"leaf_label": 0},
            {"leaf_label": 1},
            {"leaf_label": 2},
            {"leaf_label": 1},
        ],
        "root": 0,
    }],
})

ts = build_threshold_sets(model)
print("thresholds per feature:", [[float(x) for x in t] for t in ts.tau])
print("boxes in the partition:", count_boxes(ts))

# ---------------------------------------------------------------------
# 2. The question: a sample predicted as class 2, perturbed by
#    correlated Gaussian noise centred on the sample.
# ---------------------------------------------------------------------

sample = np.array([0.8, 0.2])
cov = np.array([[0.40, 0.15],
                [0.15, 0.30]])
print("\nsample:", sample, " predicted label:", classify(model, sample))

query = Query(sample, Gaussian(sample, cov), collect_box_masses=True)
report = compute_robustness(model, query)

# ---------------------------------------------------------------------
# 3. The exact answer, and where the probability mass lives.  Each box
#    is keyed by its per-dimension interval indices; index k means the
#    interval between threshold k-1 and threshold k.
# ---------------------------------------------------------------------

print(f"\nrobustness            = {report.robustness:.6f}")
print(f"integration error sum = {report.integration_err:.2e}")
print(f"boxes: {report.boxes_matching} matching "
      f"of {report.boxes_enumerated} enumerated")

print("\nmass by matching box (interval indices -> probability):")
for indices, mass in sorted(report.box_masses, key=lambda kv: -kv[1]):
    print(f"  {indices}: {mass:.6f}")

# ---------------------------------------------------------------------
# 4. Monte Carlo agrees, but only to ~1/sqrt(n): the box sum gives six
#    stable digits for less work than the 10^6-sample estimate.
# ---------------------------------------------------------------------

mc = mc_robustness(model, Query(sample, Gaussian(sample, cov)),
                   n=10**6, seed=42)
print(f"\nmonte carlo (n=10^6)  = {mc.robustness_hat:.6f}"
      f"  (std error {mc.std_error:.1e})")
print(f"difference            = "
      f"{abs(mc.robustness_hat - report.robustness):.2e}")
