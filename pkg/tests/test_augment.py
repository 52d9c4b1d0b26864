import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import blobs, brute_enn_removals, brute_knn, brute_tomek_removals, segment_distance, sqdist

from facegrowth.augment import (
    AugmentationError,
    AugmentationPlan,
    LabeledSet,
    LinearSVM,
    adasyn,
    allocate,
    augment,
    borderline_smote,
    danger_mask,
    enn_clean,
    gaussian_noise,
    kmeans_smote,
    nearest_neighbors,
    smote,
    svm_smote,
    tomek_clean,
    tomek_links,
)

OVERSAMPLERS = ("smote", "borderline", "svm-smote", "adasyn", "kmeans-smote")
CLEANED = ("smote-tomek", "smote-enn")
SEGMENT_METHODS = OVERSAMPLERS + CLEANED
FACTORS = (1, 2, 5, 10)


@pytest.fixture(scope="module")
def data():
    x, y = blobs(0)
    return LabeledSet(x, y)


def _quota(factor, n):
    return int(math.floor((factor - 1) * n + 0.5))


def check_segments(inp: LabeledSet, out: LabeledSet, tol=1e-9):
    """Every synthetic point lies on a segment between two same-class originals."""
    syn = np.flatnonzero(out.synthetic)
    for r in syn:
        s, nb = out.parents[r]
        assert inp.labels[s] == inp.labels[nb] == out.labels[r]
        assert 0.0 <= out.step[r] <= 1.0
        assert segment_distance(out.points[r], inp.points[s], inp.points[nb]) <= tol
    return syn.size


# -- plan and provenance ---------------------------------------------------------------------

def test_plan_validation():
    with pytest.raises(AugmentationError):
        AugmentationPlan("smote", 0.5)
    with pytest.raises(AugmentationError):
        AugmentationPlan("nearmiss", 2)
    with pytest.raises(AugmentationError):
        AugmentationPlan("smote", 2, k_neighbors=0)
    with pytest.raises(AugmentationError):
        AugmentationPlan("gaussian", 2, noise_sigma=-1)


def test_quota_rounding():
    plan = AugmentationPlan("smote", 1.5)
    assert [plan.quota(n) for n in (1, 2, 3, 5)] == [1, 1, 2, 3]
    assert AugmentationPlan("smote", 10).quota(100) == 900


def test_labeled_set_shapes():
    with pytest.raises(ValueError):
        LabeledSet(np.zeros((3, 2)), np.zeros(2))
    s = LabeledSet(np.zeros((3, 2)), np.array([0, 1, 1]))
    assert not s.synthetic.any()
    assert s.parents.tolist() == [[0, 0], [1, 1], [2, 2]]
    assert s.class_counts() == {0: 1, 1: 2}


# -- neighbours ------------------------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 5, 17])
def test_nearest_neighbors_match_brute_force(k):
    rng = np.random.default_rng(k)
    # rounded coordinates force plenty of distance ties
    x = np.round(rng.normal(size=(120, 2)), 1)
    nn = nearest_neighbors(x, k)
    for i in range(len(x)):
        assert nn[i].tolist() == brute_knn(x, i, k)


def test_allocate_largest_remainder():
    assert allocate([1.0, 0.0], 10).tolist() == [10, 0]
    assert allocate([1, 1, 1], 10).tolist() == [4, 3, 3]
    assert allocate([0.2, 0.5, 0.3], 7).sum() == 7
    with pytest.raises(AugmentationError):
        allocate([0, 0], 3)


# -- count law, segments, preservation, determinism -------------------------------------------------

@pytest.mark.parametrize("method", SEGMENT_METHODS)
@pytest.mark.parametrize("factor", FACTORS)
def test_factor_law_segments_and_preservation(data, method, factor):
    plan = AugmentationPlan(method, factor, seed=3)
    out = augment(data, plan)
    n = len(data)
    if method in CLEANED:
        before = out.meta["n_before_cleaning"]
        assert before == n + sum(_quota(factor, c) for c in data.class_counts().values())
        assert len(out) == before - len(out.meta["removed_rows"])
        # surviving originals are bitwise the input rows they came from
        orig = ~out.synthetic
        src = out.parents[orig, 0]
        assert np.array_equal(out.points[orig], data.points[src])
        assert np.array_equal(out.labels[orig], data.labels[src])
    else:
        assert np.array_equal(out.points[:n], data.points)
        assert np.array_equal(out.labels[:n], data.labels)
        assert not out.synthetic[:n].any() and out.synthetic[n:].all()
        for c, n_c in data.class_counts().items():
            assert int(np.sum(out.labels == c)) == n_c + _quota(factor, n_c)
    check_segments(data, out)
    again = augment(data, plan)
    assert np.array_equal(again.points, out.points) and np.array_equal(again.labels, out.labels)


@pytest.mark.parametrize("method", OVERSAMPLERS + ("gaussian",))
def test_proportions_preserved(data, method):
    out = augment(data, AugmentationPlan(method, 5, noise_sigma=0.1))
    before = np.array(list(data.class_counts().values())) / len(data)
    after = np.array(list(out.class_counts().values())) / len(out)
    assert np.allclose(before, after, atol=1.0 / len(data))


def test_seed_changes_output(data):
    a = smote(data, AugmentationPlan("smote", 3, seed=1))
    b = smote(data, AugmentationPlan("smote", 3, seed=2))
    assert not np.array_equal(a.points, b.points)


def test_inputs_not_mutated(data):
    x = data.points.copy()
    for m in SEGMENT_METHODS + ("gaussian",):
        augment(data, AugmentationPlan(m, 3, noise_sigma=0.2))
    assert np.array_equal(x, data.points)


def test_factor_one_is_identity(data):
    for m in OVERSAMPLERS + ("gaussian",):
        out = augment(data, AugmentationPlan(m, 1))
        assert np.array_equal(out.points, data.points) and not out.synthetic.any()


def test_size_example():
    x, y = blobs(1, sizes=(100, 430, 100))
    out = smote(LabeledSet(x, y), AugmentationPlan("smote", 10))
    assert [int(np.sum(out.labels == c)) for c in range(3)] == [1000, 4300, 1000]


# -- smote specifics -----------------------------------------------------------------------------------

def test_two_point_class_segment():
    s = LabeledSet(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0, 0]))
    out = smote(s, AugmentationPlan("smote", 1.5, k_neighbors=1))
    p = out.points[-1]
    assert out.synthetic.sum() == 1
    assert p[1] == 0.0 and 0.0 <= p[0] <= 1.0


def test_smote_neighbours_are_class_knn(data):
    out = smote(data, AugmentationPlan("smote", 3, k_neighbors=5))
    for r in np.flatnonzero(out.synthetic)[:200]:
        s, nb = out.parents[r]
        pool = np.flatnonzero(data.labels == data.labels[s])
        assert nb in brute_knn(data.points, s, 5, pool)


def test_single_member_class_duplicates_with_warning():
    s = LabeledSet(np.array([[0.0, 0.0], [5.0, 5.0], [6.0, 5.0]]), np.array([0, 1, 1]))
    with pytest.warns(UserWarning):
        out = smote(s, AugmentationPlan("smote", 3))
    dup = out.points[out.synthetic & (out.labels == 0)]
    assert np.array_equal(dup, np.zeros((2, 2)))


def test_empty_set_rejected():
    with pytest.raises(AugmentationError):
        smote(LabeledSet(np.zeros((0, 2)), np.zeros(0, int)), AugmentationPlan("smote", 2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.5, 2, 3.25]), st.integers(1, 6))
def test_smote_property(seed, factor, k):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 15, size=3)
    x = rng.normal(size=(sizes.sum(), 3))
    y = np.repeat([0, 1, 2], sizes)
    inp = LabeledSet(x, y)
    out = smote(inp, AugmentationPlan("smote", factor, k_neighbors=k, seed=seed))
    assert out.synthetic.sum() == sum(_quota(factor, n) for n in sizes)
    check_segments(inp, out)


# -- borderline ---------------------------------------------------------------------------------------------

def test_danger_rule_and_noise_exclusion():
    # class 0 interior cluster, a planted class-0 outlier deep inside class 1
    rng = np.random.default_rng(0)
    a = rng.normal([0, 0], 0.3, size=(20, 2))
    b = rng.normal([4, 0], 0.3, size=(20, 2))
    x = np.vstack([a, b, [[4.0, 0.0]], [[2.0, 0.0]]])
    y = np.array([0] * 20 + [1] * 20 + [0, 0])
    s = LabeledSet(x, y)
    m = 10
    mask = danger_mask(s, m)
    nn = nearest_neighbors(x, m)
    other = (y[nn] != y[:, None]).sum(axis=1)
    assert np.array_equal(mask, (other * 2 >= m) & (other < m))
    assert not mask[40]              # outlier: all neighbours other-class
    assert not mask[:20].any()       # interior points are safe
    out = borderline_smote(s, AugmentationPlan("borderline", 2, m_neighbors=m))
    seeds = set(out.parents[out.synthetic & (out.labels == 0), 0].tolist())
    assert 40 not in seeds
    assert seeds <= set(np.flatnonzero(mask & (y == 0)).tolist())


def test_borderline_fallback_recorded():
    x, y = blobs(2, sizes=(20, 20), spread=0.1)
    x[y == 1] += 50.0
    out = borderline_smote(LabeledSet(x, y), AugmentationPlan("borderline", 2))
    assert out.meta["fallback"] == {0: "smote", 1: "smote"}
    assert out.synthetic.sum() == 40


def test_borderline_frontier_radius():
    # distant blobs plus five frontier points per class facing each other
    rng = np.random.default_rng(4)
    blob_a = rng.normal([-20, 0], 0.5, size=(40, 2))
    blob_b = rng.normal([20, 0], 0.5, size=(40, 2))
    front_a = np.column_stack([np.full(5, -0.2), np.linspace(-0.2, 0.2, 5)])
    front_b = np.column_stack([np.full(5, 0.2), np.linspace(-0.2, 0.2, 5)])
    x = np.vstack([blob_a, front_a, blob_b, front_b])
    y = np.repeat([0, 0, 1, 1], [40, 5, 40, 5])
    s = LabeledSet(x, y)
    out = borderline_smote(s, AugmentationPlan("borderline", 3, m_neighbors=10, k_neighbors=3))
    assert not out.meta["fallback"]
    assert sorted(out.meta["danger"]) == list(range(40, 45)) + list(range(85, 90))
    syn = out.points[out.synthetic]
    assert syn.shape[0] == 180
    assert np.all(np.hypot(syn[:, 0], syn[:, 1]) <= 0.3)


# -- svm-smote ----------------------------------------------------------------------------------------------

def test_svm_seeds_are_margin_points():
    # well separated along x; the margin points are the facing extremes
    rng = np.random.default_rng(5)
    a = np.column_stack([rng.uniform(-10, -2, 80), rng.uniform(-5, 5, 80)])
    b = np.column_stack([rng.uniform(2, 10, 80), rng.uniform(-5, 5, 80)])
    s = LabeledSet(np.vstack([a, b]), np.repeat([0, 1], 80))
    out = svm_smote(s, AugmentationPlan("svm-smote", 2, svm_epochs=200))
    for c in (0, 1):
        sv = np.array(out.meta["support"][c])
        assert 0 < sv.size < 80
        # support vectors lie on the inner side of their class
        inner = np.abs(s.points[sv, 0]).mean()
        rest = np.setdiff1d(np.flatnonzero(s.labels == c), sv)
        assert inner < np.abs(s.points[rest, 0]).mean()
    assert out.synthetic.sum() == 160


def test_svm_requires_two_classes():
    s = LabeledSet(np.random.default_rng(0).normal(size=(10, 2)), np.zeros(10, int))
    with pytest.raises(AugmentationError):
        svm_smote(s, AugmentationPlan("svm-smote", 2))


def test_linear_svm_separates():
    x, y = blobs(6, sizes=(50, 50), spread=0.3)
    svm = LinearSVM(epochs=50).fit(x, y)
    pred = np.argmax(svm.decision_function(x), axis=1)
    assert np.mean(pred == y) > 0.97


def test_svm_extrapolation_optional(data):
    out = svm_smote(data, AugmentationPlan("svm-smote", 3, out_step=0.5))
    assert out.synthetic.sum() == sum(_quota(3, n) for n in data.class_counts().values())
    steps = out.step[out.synthetic]
    assert np.all((steps >= -0.5) & (steps <= 1.0))


# -- adasyn -----------------------------------------------------------------------------------------------------

def test_adasyn_weights_and_allocation(data):
    out = adasyn(data, AugmentationPlan("adasyn", 4, k_neighbors=5))
    ratio = np.array(out.meta["ratio"])
    for c in range(3):
        members = np.flatnonzero(data.labels == c)
        seeds = out.parents[out.synthetic & (out.labels == c), 0]
        counts = np.bincount(seeds, minlength=len(data))[members]
        assert np.array_equal(counts, allocate(ratio[members], _quota(4, members.size)))
        if ratio[members].sum() > 0:
            assert np.all(counts[ratio[members] == 0] == 0)


def test_adasyn_interior_class_falls_back():
    x, y = blobs(7, sizes=(15, 15), spread=0.1)
    x[y == 1] += 100.0
    out = adasyn(LabeledSet(x, y), AugmentationPlan("adasyn", 2))
    assert out.meta["fallback"] == {0: "uniform", 1: "uniform"}
    assert out.synthetic.sum() == 30


# -- kmeans-smote -------------------------------------------------------------------------------------------------

def test_kmeans_smote_tight_clusters_match_smote_segments():
    rng = np.random.default_rng(8)
    centres = np.array([[0, 0], [20, 0], [0, 20]])
    x = np.vstack([rng.normal(c, 0.5, size=(25, 2)) for c in centres])
    y = np.repeat([0, 1, 2], 25)
    s = LabeledSet(x, y)
    out = kmeans_smote(s, AugmentationPlan("kmeans-smote", 3, clusters=3))
    assert not out.meta["fallback"]
    clusters = np.array(out.meta["clusters"])
    for c in range(3):
        assert len(set(clusters[y == c])) == 1
    # same segments per-class smote may use: k nearest within the class
    for r in np.flatnonzero(out.synthetic):
        sd, nb = out.parents[r]
        assert nb in brute_knn(x, sd, 5, np.flatnonzero(y == y[sd]))


def test_kmeans_smote_quota_and_eligibility(data):
    out = kmeans_smote(data, AugmentationPlan("kmeans-smote", 4, clusters=8))
    clusters = np.array(out.meta["clusters"])
    for c in range(3):
        n_c = int(np.sum(data.labels == c))
        assert int(np.sum(out.synthetic & (out.labels == c))) == _quota(4, n_c)
        if c in out.meta["fallback"]:
            continue
        for r in np.flatnonzero(out.synthetic & (out.labels == c)):
            j = clusters[out.parents[r, 0]]
            members = clusters == j
            assert clusters[out.parents[r, 1]] == j
            assert np.sum(members & (data.labels == c)) / members.sum() > 0.5


def test_kmeans_smote_sparser_cluster_gets_more():
    rng = np.random.default_rng(12)
    sparse = rng.normal([0, 0], 1.5, size=(10, 2))
    dense = rng.normal([40, 0], 0.3, size=(40, 2))
    other = rng.normal([0, 40], 0.5, size=(30, 2))
    x = np.vstack([sparse, dense, other])
    y = np.repeat([0, 0, 1], [10, 40, 30])
    out = kmeans_smote(LabeledSet(x, y), AugmentationPlan("kmeans-smote", 3, clusters=3))
    clusters = np.array(out.meta["clusters"])
    assert len({clusters[0], clusters[10], clusters[50]}) == 3
    # oracle: sparsity weight per cluster, then largest-remainder split of the class quota
    w = []
    for pts in (sparse, dense):
        dists = [np.sqrt(sqdist(a, b)) for i, a in enumerate(pts) for b in pts[i + 1:]]
        w.append(np.mean(dists) ** 2 / len(pts))
    quota = _quota(3, 50)
    raw = [quota * wi / sum(w) for wi in w]
    share = [int(np.floor(r)) for r in raw]
    if sum(share) < quota:
        share[int(np.argmax([r - s for r, s in zip(raw, share)]))] += 1
    seeds = out.parents[out.synthetic & (out.labels == 0), 0]
    got = [int(np.sum(seeds < 10)), int(np.sum((seeds >= 10) & (seeds < 50)))]
    assert got == share
    assert got[0] > got[1]


def test_kmeans_too_many_clusters():
    s = LabeledSet(np.zeros((4, 2)) + np.arange(4)[:, None], np.array([0, 0, 1, 1]))
    with pytest.raises(AugmentationError):
        kmeans_smote(s, AugmentationPlan("kmeans-smote", 2, clusters=8))


# -- gaussian noise ------------------------------------------------------------------------------------------------

def test_gaussian_zero_sigma_copies(data):
    out = gaussian_noise(data, AugmentationPlan("gaussian", 3, noise_sigma=0.0))
    syn = np.flatnonzero(out.synthetic)
    assert np.array_equal(out.points[syn], data.points[out.parents[syn, 0]])


def test_gaussian_noise_is_centred():
    x, y = blobs(9, sizes=(100, 100))
    sigma = 0.2
    out = gaussian_noise(LabeledSet(x, y), AugmentationPlan("gaussian", 60, noise_sigma=sigma, seed=1))
    syn = np.flatnonzero(out.synthetic)
    diff = out.points[syn] - x[out.parents[syn, 0]]
    n = syn.size
    assert n >= 10_000
    assert np.all(np.abs(diff.mean(axis=0)) <= 5 * sigma / math.sqrt(n))
    assert np.allclose(diff.std(axis=0), sigma, rtol=0.05)


# -- cleaners -------------------------------------------------------------------------------------------------------

def test_tomek_hand_example():
    s = LabeledSet(np.array([[0.0, 0.0], [0.0, 1.0], [0.1, 0.0]]), np.array([0, 0, 1]))
    assert tomek_links(s) == [(0, 2)]
    out = tomek_clean(s)
    assert out.points.tolist() == [[0.0, 1.0], [0.1, 0.0]]


def test_tomek_distant_blobs_identity():
    x, y = blobs(10, sizes=(30, 30), spread=0.2)
    x[y == 1] += 30
    out = tomek_clean(LabeledSet(x, y))
    assert len(out) == 60 and tomek_links(LabeledSet(x, y)) == []


def test_tomek_equal_classes_remove_nothing():
    s = LabeledSet(np.array([[0.0], [0.1], [5.0], [5.1]]), np.array([0, 1, 1, 0]))
    assert len(tomek_links(s)) == 2
    assert len(tomek_clean(s)) == 4


@pytest.mark.parametrize("seed", range(3))
def test_tomek_matches_oracle_200(seed):
    x, y = blobs(seed + 20, sizes=(50, 100, 50))
    s = LabeledSet(x, y)
    out = tomek_clean(s)
    expect = brute_tomek_removals(x, y)
    assert set(out.meta["removed_rows"]) == expect
    linked = {i for pair in tomek_links(s) for i in pair}
    assert expect <= linked


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("k", [3, 4])
def test_enn_matches_oracle_200(seed, k):
    x, y = blobs(seed + 30, sizes=(50, 100, 50))
    out = enn_clean(LabeledSet(x, y), k)
    assert set(out.meta["removed_rows"]) == brute_enn_removals(x, y, k)


def test_enn_surrounded_point_removed_and_homogeneous_identity():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    out = enn_clean(LabeledSet(x, np.array([1, 0, 0, 0, 0])), 3)
    assert 0 in out.meta["removed_rows"]
    same = enn_clean(LabeledSet(x, np.zeros(5, int)), 3)
    assert len(same) == 5


def test_enn_order_independent():
    x, y = blobs(40, sizes=(40, 80, 40))
    perm = np.random.default_rng(0).permutation(len(x))
    a = enn_clean(LabeledSet(x, y), 3)
    b = enn_clean(LabeledSet(x[perm], y[perm]), 3)
    removed_a = set(a.meta["removed_rows"])
    removed_b = {int(perm[r]) for r in b.meta["removed_rows"]}
    assert removed_a == removed_b


def test_enn_too_small():
    with pytest.raises(AugmentationError):
        enn_clean(LabeledSet(np.zeros((3, 1)), np.zeros(3, int)), 3)


def test_composite_bookkeeping(data):
    for m in CLEANED:
        out = augment(data, AugmentationPlan(m, 5))
        assert len(out) == out.meta["n_before_cleaning"] - sum(out.meta["removed"].values())
        assert out.meta["removed_synthetic"] > 0
        assert out.synthetic.sum() == sum(out.meta["added"].values()) - out.meta["removed_synthetic"]


def test_composite_identity_on_clean_data():
    x, y = blobs(11, sizes=(20, 20), spread=0.2)
    x[y == 1] += 30
    for m in CLEANED:
        out = augment(LabeledSet(x, y), AugmentationPlan(m, 1))
        assert np.array_equal(out.points, x)
