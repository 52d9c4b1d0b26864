"""
Classifiers under repeated cross-validation
============================================

The implemented model menu on the planted feature, 5-fold CV repeated a few
times, against the most-frequent-class baseline.
"""

# %%
from facegrowth import CVConfig, CohortConfig, ExperimentConfig, LandmarkRegistry, build_feature_matrix, generate_cohort, run_experiment
from facegrowth.evaluation import mfc_baseline
from facegrowth.features import ceph_specs

cohort = generate_cohort(CohortConfig(signal_strength=0.9, seed=0))
fm = build_feature_matrix(cohort.records, ceph_specs(["12-9"]), LandmarkRegistry.default())
print("MFC baseline:", round(mfc_baseline(fm.labels), 4))

# %%
cv = CVConfig(folds=5, repeats=4, master_seed=0)
for model in ("LR", "NN(5)", "DT", "RF(50)", "MLP(20)"):
    res = run_experiment(ExperimentConfig(model, ("ceph:SN-MP(12-9)",), standardize=True, cv=cv), fm)
    print(f"{model:8s} {res.mean:.4f} +/- {res.sd:.4f}  ({len(res)} runs)")
