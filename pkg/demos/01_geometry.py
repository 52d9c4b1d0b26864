"""
Landmark geometry
=================

SN/MP angles, the Sella transform and Procrustes alignment on a handful of
synthetic cephalograms.
"""

# %%
import numpy as np

from facegrowth import CohortConfig, generate_cohort, procrustes_align, sella_transform, sn_mp_angle

cohort = generate_cohort(CohortConfig(n_subjects=5, seed=1))
first = cohort.records[0]
print(first.subject_id, first.age_group, first.age_years)

# %%
# The SN/MP angle is measured between two lines, so it does not care about
# pose or image offset.
for rec in cohort.records[:6]:
    print(f"{rec.subject_id} age {rec.age_group:2d}: SN/MP = {sn_mp_angle(rec):6.2f} deg")

# %%
# Translating so that Sella sits at the origin keeps every pairwise distance.
shape = sella_transform(first)
print(shape.coordinates[:3])

# %%
# Generalized Procrustes: centred, unit size, rotated onto a common mean.
nines = [r for r in cohort.records if r.age_group == 9]
names = list(nines[0].landmarks)
res = procrustes_align([r.coords(names) for r in nines], source_ids=[r.subject_id for r in nines])
print("converged:", res.converged, "after", res.n_iter, "iterations")
print("objective:", np.round(res.objective_history, 6))
for a in res.aligned:
    c = a.coordinates
    print(a.source_id, "centroid", np.round(c.mean(axis=0), 12), "size", round(np.hypot(*c.T).sum(), 12))
