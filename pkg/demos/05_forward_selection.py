"""
Staged forward selection
========================

Stage 1 ranks single features across model kinds; later stages grow the
winning set while the t-test says it still helps.
"""

# %%
from facegrowth import CVConfig, CohortConfig, LandmarkRegistry, build_feature_matrix, forward_selection, generate_cohort
from facegrowth.features import ceph_specs

cohort = generate_cohort(CohortConfig(signal_strength=0.9, seed=0))
fm = build_feature_matrix(cohort.records, ceph_specs(["12-9"]), LandmarkRegistry.default())
pool = [c for c in fm.columns if c != "age"]

res = forward_selection(fm, pool, ["LR", "NN(5)"], CVConfig(5, 3, 0), max_stages=2)

# %%
for row in res.table_rows(top_n=5):
    print(f"stage {row['stage']} #{row['rank']}: {row['model']:6s} {row['feature']:22s} {row['mean']:.4f}")
print("selected:", res.selected, "-", res.stop_reason)
