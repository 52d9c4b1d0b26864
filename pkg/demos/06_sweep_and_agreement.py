"""
Augmentation factor sweep and rater agreement
==============================================

Accuracy against augmentation factor, then the two-rater agreement fixture.
"""

# %%
from pathlib import Path

from facegrowth import CVConfig, CohortConfig, ExperimentConfig, LandmarkRegistry, build_feature_matrix, generate_cohort
from facegrowth.evaluation import expert_fixture, factor_sweep, rater_agreement
from facegrowth.features import ceph_specs
from facegrowth.svg import line_chart_svg

out = Path("demo_output")
out.mkdir(exist_ok=True)

cohort = generate_cohort(CohortConfig(signal_strength=0.9, seed=0))
fm = build_feature_matrix(cohort.records, ceph_specs(["12-9"]), LandmarkRegistry.default())
base = ExperimentConfig("LR", ("ceph:SN-MP(12-9)",), standardize=True, cv=CVConfig(5, 2, 0))
sweep = factor_sweep(base, fm, ["smote", "borderline", "gaussian"], [1, 5, 10], noise_levels=(0.1,))
print("baseline:", round(sweep.baseline.mean, 4))
series = {}
for row in sweep.table_rows():
    print(f"{row['method']:14s} x{row['factor']:<4g} {row['mean']:.4f}")
    xs, ys = series.setdefault(row["method"], ([], []))
    xs.append(row["factor"])
    ys.append(row["mean"])
(out / "sweep.svg").write_text(line_chart_svg(series, baseline=sweep.baseline.mean, xlabel="factor",
                                              ylabel="mean accuracy"))

# %%
a, b, truth = expert_fixture()
agr = rater_agreement(a, b, truth)
print(f"rater A {agr.accuracy_a:.4f}, rater B {agr.accuracy_b:.4f}, consistency {agr.consistency:.4f}")
