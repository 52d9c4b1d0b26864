"""
Oversampling a small imbalanced set
====================================

Every augmentation method on the same two-feature training set, written out
as SVG scatter plots.
"""

# %%
from pathlib import Path

import numpy as np

from facegrowth import AugmentationPlan, CohortConfig, LabeledSet, LandmarkRegistry, augment, build_feature_matrix, generate_cohort
from facegrowth.augment import METHODS
from facegrowth.features import ceph_specs, standardize_fit
from facegrowth.svg import scatter_svg

out = Path("demo_output")
out.mkdir(exist_ok=True)

cohort = generate_cohort(CohortConfig(n_subjects=200, signal_strength=0.9, seed=2))
reg = LandmarkRegistry.default()
fm = build_feature_matrix(cohort.records, ceph_specs(["12-9"]), reg)
cols = ["ceph:SN-MP(12-9)", "ceph:FH-MP(12-9)"]
X = fm.select(cols).values
X = standardize_fit(X).apply(X)
data = LabeledSet(X, fm.labels)
print("class counts:", np.bincount(data.labels))

# %%
for method in METHODS[1:]:
    res = augment(data, AugmentationPlan(method, 3, seed=0))
    counts = np.bincount(res.labels, minlength=3)
    print(f"{method:12s} n={len(res):4d} synthetic={int(res.synthetic.sum()):4d} per class={counts.tolist()}")
    svg = scatter_svg(res.points, res.labels, res.synthetic, class_names={0: "H", 1: "M", 2: "V"},
                      title=f"{method} x3", xlabel=cols[0], ylabel=cols[1])
    (out / f"augment_{method}.svg").write_text(svg)
