"""SMOTE-family oversampling, post-SMOTE cleaning and Gaussian-noise injection.

All oversamplers augment every class by the same factor: a class with ``n_c``
original points receives ``round((factor - 1) * n_c)`` synthetic ones, so the
class proportions of the input are kept. Originals are returned first and
unchanged, followed by synthetic points grouped by class.

Synthetic points keep their provenance: ``parents[i] = (seed, neighbour)`` are
row indices into the input set and ``step[i]`` is the interpolation
coefficient, i.e. ``point = X[seed] + step * (X[neighbour] - X[seed])``.
For original rows ``parents[i] = (i, i)`` and ``step[i]`` is NaN.

Neighbour searches are brute force on Euclidean distance; ties are broken by
row index, so results never depend on the evaluation order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

METHODS = ("none", "smote", "borderline", "svm-smote", "adasyn", "kmeans-smote",
           "smote-tomek", "smote-enn", "gaussian")


class AugmentationError(ValueError):
    pass


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class AugmentationPlan:
    method: str = "none"
    factor: float = 1.0
    k_neighbors: int = 5
    m_neighbors: int = 10
    enn_k: int = 3
    clusters: int = 8
    noise_sigma: float = 0.0
    seed: int = 0
    out_step: float = 0.0          # svm-smote extrapolation length, 0 disables
    kmeans_threshold: float = 0.5
    kmeans_max_iter: int = 100
    svm_epochs: int = 100

    def __post_init__(self):
        if self.method not in METHODS:
            raise AugmentationError(f"unknown augmentation method {self.method!r}; expected one of {METHODS}")
        if _as_fraction(self.factor) < 1:
            raise AugmentationError("augmentation factor must be >= 1")
        for name in ("k_neighbors", "m_neighbors", "enn_k", "clusters", "kmeans_max_iter", "svm_epochs"):
            if int(getattr(self, name)) < 1:
                raise AugmentationError(f"{name} must be >= 1")
        if self.noise_sigma < 0:
            raise AugmentationError("noise_sigma must be >= 0")
        if self.out_step < 0:
            raise AugmentationError("out_step must be >= 0")

    def quota(self, n_c: int) -> int:
        """round((factor - 1) * n_c), halves rounded up."""
        q = (_as_fraction(self.factor) - 1) * n_c
        return int(math.floor(q + Fraction(1, 2)))


@dataclass(frozen=True)
class LabeledSet:
    points: np.ndarray
    labels: np.ndarray
    synthetic: np.ndarray | None = None
    parents: np.ndarray | None = None
    step: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.points, dtype=float))
        if np.asarray(self.points).ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(self.labels).ravel()
        if x.shape[0] != y.shape[0]:
            raise AugmentationError("points and labels differ in length")
        n = x.shape[0]
        syn = np.zeros(n, bool) if self.synthetic is None else np.asarray(self.synthetic, bool)
        par = np.repeat(np.arange(n)[:, None], 2, axis=1) if self.parents is None else np.asarray(self.parents, int)
        stp = np.full(n, np.nan) if self.step is None else np.asarray(self.step, float)
        for name, arr in (("points", x), ("labels", y), ("synthetic", syn), ("parents", par), ("step", stp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.points.shape[0]

    @property
    def origin(self) -> np.ndarray:
        return np.where(self.synthetic, "synthetic", "original")

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_counts(self) -> dict:
        return {c.item() if hasattr(c, "item") else c: int(np.sum(self.labels == c)) for c in self.classes}

    def subset(self, keep) -> "LabeledSet":
        keep = np.asarray(keep)
        return LabeledSet(self.points[keep], self.labels[keep], self.synthetic[keep],
                          self.parents[keep], self.step[keep], dict(self.meta))


# -- neighbour search -------------------------------------------------------

def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, computed by differences (not the dot-product expansion)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros((a.shape[0], b.shape[0]))
    tmp = np.empty_like(out)
    for j in range(a.shape[1]):
        np.subtract(a[:, j, None], b[None, :, j], out=tmp)
        tmp *= tmp
        out += tmp
    return out


def nearest_neighbors(x: np.ndarray, k: int, query: np.ndarray | None = None, exclude_self: bool = True):
    """Indices of the ``k`` nearest rows of ``x`` for each query row.

    Ordered by distance then index. With ``query=None`` the queries are the
    rows of ``x`` themselves and each row is excluded from its own list.
    """
    self_query = query is None
    q = x if self_query else np.asarray(query, dtype=float)
    n_avail = x.shape[0] - (1 if self_query and exclude_self else 0)
    k = min(k, n_avail)
    if k <= 0:
        return np.empty((q.shape[0], 0), dtype=int)
    out = np.empty((q.shape[0], k), dtype=int)
    chunk = max(1, 2_000_000 // max(x.shape[0], 1))
    for s in range(0, q.shape[0], chunk):
        d = squared_distances(q[s:s + chunk], x)
        if self_query and exclude_self:
            rows = np.arange(d.shape[0])
            d[rows, rows + s] = np.inf
        out[s:s + chunk] = _knn_rows(d, k)
    return out


def _knn_rows(d: np.ndarray, k: int) -> np.ndarray:
    if k >= d.shape[1] - 1 or d.shape[1] <= 64:
        return np.argsort(d, axis=1, kind="stable")[:, :k]
    part = np.argpartition(d, k - 1, axis=1)[:, :k]
    pd = np.take_along_axis(d, part, axis=1)
    # sort the k candidates by (distance, index)
    order = np.lexsort((part, pd), axis=1)
    out = np.take_along_axis(part, order, axis=1)
    # rows where the k-th distance is shared beyond the partition need a full tie-aware pass
    kth = np.take_along_axis(pd, order[:, -1:], axis=1)[:, 0]
    tied = np.flatnonzero(np.sum(d <= kth[:, None], axis=1) > k)
    for r in tied:
        cand = np.flatnonzero(d[r] <= kth[r])
        out[r] = cand[np.argsort(d[r, cand], kind="stable")][:k]
    return out


def allocate(weights, total: int) -> np.ndarray:
    """Split ``total`` into integers proportional to ``weights`` (largest remainder).

    Each share is the floor or ceiling of ``w_i / sum(w) * total``; leftover
    units go to the largest remainders, lower index first on ties.
    """
    w = np.asarray(weights, dtype=float)
    if total == 0 or w.size == 0:
        return np.zeros(w.size, dtype=int)
    s = w.sum()
    if s <= 0:
        raise AugmentationError("allocation weights sum to zero")
    raw = w / s * total
    out = np.floor(raw).astype(int)
    short = total - int(out.sum())
    rem = raw - out
    order = np.lexsort((np.arange(w.size), -rem))
    out[order[:short]] += 1
    return out


# -- building blocks ---------------------------------------------------------

class _Builder:
    """Collects synthetic points for one augmentation run."""

    def __init__(self, data: LabeledSet, rng: np.random.Generator):
        self.data = data
        self.rng = rng
        self.points: list[np.ndarray] = []
        self.labels: list = []
        self.parents: list[tuple[int, int]] = []
        self.steps: list[float] = []
        self.meta = {"method": None, "added": {}, "removed": {}, "fallback": {}}

    def interpolate(self, seeds: np.ndarray, members: np.ndarray, k: int, label, step_scale=None):
        """Interpolate from each seed toward one of its k nearest same-class members.

        ``seeds`` and ``members`` are global row indices; seeds repeat once per
        synthetic point. ``step_scale`` (optional, per seed) turns individual
        draws into extrapolation ``seed + u * scale * (seed - neighbour)``.
        """
        if seeds.size == 0:
            return
        x = self.data.points
        if members.size == 1:
            warnings.warn(f"class {label!r} has a single sample; synthetic points duplicate it", stacklevel=3)
            for s in seeds:
                self._add(x[s].copy(), label, s, s, 0.0)
            return
        k = min(k, members.size - 1)
        pos = {m: i for i, m in enumerate(members)}
        table = nearest_neighbors(x[members], k, query=None)
        for j, s in enumerate(seeds):
            nbrs = members[table[pos[s]]]
            nb = int(nbrs[self.rng.integers(k)])
            u = float(self.rng.random())
            if step_scale is not None and step_scale[j] > 0:
                t = -u * float(step_scale[j])
            else:
                t = u
            self._add(x[s] + t * (x[nb] - x[s]), label, int(s), nb, t)

    def _add(self, point, label, seed, nbr, step):
        self.points.append(point)
        self.labels.append(label)
        self.parents.append((seed, nbr))
        self.steps.append(step)
        self.meta["added"][_key(label)] = self.meta["added"].get(_key(label), 0) + 1

    def result(self, method: str) -> LabeledSet:
        d = self.data
        self.meta["method"] = method
        if not self.points:
            return LabeledSet(d.points, d.labels, d.synthetic, d.parents, d.step, self.meta)
        pts = np.vstack([d.points, np.asarray(self.points).reshape(len(self.points), -1)])
        labels = np.concatenate([d.labels, np.asarray(self.labels, dtype=d.labels.dtype)])
        syn = np.concatenate([d.synthetic, np.ones(len(self.points), bool)])
        par = np.vstack([d.parents, np.asarray(self.parents, int)])
        stp = np.concatenate([d.step, np.asarray(self.steps, float)])
        return LabeledSet(pts, labels, syn, par, stp, self.meta)


def _key(label):
    return label.item() if hasattr(label, "item") else label


def _check(data: LabeledSet) -> None:
    if len(data) == 0:
        raise AugmentationError("cannot augment an empty set")


def _class_members(data: LabeledSet):
    for c in data.classes:
        yield c, np.flatnonzero(data.labels == c)


def _uniform_seeds(pool: np.ndarray, n: int, rng) -> np.ndarray:
    return pool[rng.integers(pool.size, size=n)] if n else np.empty(0, dtype=int)


def _smote_class(b: _Builder, c, members, quota, k):
    seeds = _uniform_seeds(members, quota, b.rng)
    b.interpolate(seeds, members, k, c)


# -- oversamplers ------------------------------------------------------------

def smote(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    """Plain SMOTE applied to every class independently."""
    _check(data)
    b = _Builder(data, np.random.default_rng(plan.seed))
    for c, members in _class_members(data):
        _smote_class(b, c, members, plan.quota(members.size), plan.k_neighbors)
    return b.result("smote")


def danger_mask(data: LabeledSet, m_neighbors: int) -> np.ndarray:
    """Borderline test: m/2 <= (other-class among m nearest) < m."""
    m = min(m_neighbors, len(data) - 1)
    if m < 1:
        return np.zeros(len(data), bool)
    nn = nearest_neighbors(data.points, m)
    other = np.sum(data.labels[nn] != data.labels[:, None], axis=1)
    return (2 * other >= m) & (other < m)


def borderline_smote(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    """Borderline-SMOTE (variant 1): seeds restricted to DANGER samples.

    A class without DANGER samples falls back to plain SMOTE; this is
    recorded in ``meta["fallback"]``.
    """
    _check(data)
    b = _Builder(data, np.random.default_rng(plan.seed))
    danger = danger_mask(data, plan.m_neighbors)
    b.meta["danger"] = np.flatnonzero(danger).tolist()
    for c, members in _class_members(data):
        quota = plan.quota(members.size)
        pool = members[danger[members]]
        if pool.size == 0:
            if quota:
                b.meta["fallback"][_key(c)] = "smote"
            pool = members
        b.interpolate(_uniform_seeds(pool, quota, b.rng), members, plan.k_neighbors, c)
    return b.result("borderline")


@dataclass
class LinearSVM:
    """One-vs-rest linear soft-margin classifier trained with mini-batch Pegasos.

    Inputs are standardized internally; ``decision_function`` works on raw
    coordinates.
    """

    lam: float | None = None
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def fit(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise AugmentationError("SVM-SMOTE needs at least two classes")
        self.mu_ = x.mean(axis=0)
        sd = x.std(axis=0)
        self.sd_ = np.where(sd > 1e-12, sd, 1.0)
        z = np.hstack([(x - self.mu_) / self.sd_, np.ones((x.shape[0], 1))])
        n = z.shape[0]
        lam = self.lam if self.lam is not None else 1.0 / n
        rng = np.random.default_rng(self.seed)
        weights = []
        for c in self.classes_:
            t_sign = np.where(y == c, 1.0, -1.0)
            w = np.zeros(z.shape[1])
            avg = np.zeros_like(w)
            n_avg = 0
            t = 0
            total = self.epochs * max(1, math.ceil(n / self.batch_size))
            for _ in range(self.epochs):
                order = rng.permutation(n)
                for s in range(0, n, self.batch_size):
                    t += 1
                    idx = order[s:s + self.batch_size]
                    margin = t_sign[idx] * (z[idx] @ w)
                    viol = margin < 1
                    eta = 1.0 / (lam * t)
                    grad = lam * w - (t_sign[idx][viol, None] * z[idx][viol]).sum(axis=0) / idx.size
                    w = w - eta * grad
                    norm = np.linalg.norm(w[:-1])
                    cap = 1.0 / math.sqrt(lam)
                    if norm > cap:
                        w[:-1] *= cap / norm
                    if t > total // 2:
                        avg += w
                        n_avg += 1
            weights.append(avg / max(n_avg, 1))
        self.coef_ = np.array(weights)
        return self

    def decision_function(self, x) -> np.ndarray:
        z = (np.asarray(x, float) - self.mu_) / self.sd_
        return z @ self.coef_[:, :-1].T + self.coef_[:, -1]


def svm_smote(data: LabeledSet, plan: AugmentationPlan, tol: float = 1e-6) -> LabeledSet:
    """SVM-SMOTE: seeds are each class's support vectors, |f_c(x)| <= 1 + tol.

    With ``plan.out_step > 0`` seeds whose m-neighbourhood is mostly their own
    class extrapolate away from the neighbour instead of interpolating.
    """
    _check(data)
    if data.classes.size < 2:
        raise AugmentationError("SVM-SMOTE needs at least two classes")
    b = _Builder(data, np.random.default_rng(plan.seed))
    svm = LinearSVM(epochs=plan.svm_epochs, seed=plan.seed).fit(data.points, data.labels)
    dec = svm.decision_function(data.points)
    b.meta["support"] = {}
    safe = None
    if plan.out_step > 0:
        m = min(plan.m_neighbors, len(data) - 1)
        nn = nearest_neighbors(data.points, m)
        same = np.sum(data.labels[nn] == data.labels[:, None], axis=1)
        safe = 2 * same > m
    for ci, (c, members) in enumerate(_class_members(data)):
        quota = plan.quota(members.size)
        sv = members[np.abs(dec[members, ci]) <= 1.0 + tol]
        b.meta["support"][_key(c)] = sv.tolist()
        pool = sv
        if pool.size == 0:
            if quota:
                b.meta["fallback"][_key(c)] = "smote"
            pool = members
        seeds = _uniform_seeds(pool, quota, b.rng)
        scale = None if safe is None else np.where(safe[seeds], plan.out_step, 0.0)
        b.interpolate(seeds, members, plan.k_neighbors, c, step_scale=scale)
    return b.result("svm-smote")


def adasyn(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    """ADASYN: class quota spread over samples by their share of other-class neighbours."""
    _check(data)
    b = _Builder(data, np.random.default_rng(plan.seed))
    k = min(plan.k_neighbors, len(data) - 1)
    ratio = np.zeros(len(data))
    if k >= 1:
        nn = nearest_neighbors(data.points, k)
        ratio = np.sum(data.labels[nn] != data.labels[:, None], axis=1) / k
    b.meta["ratio"] = ratio.tolist()
    for c, members in _class_members(data):
        quota = plan.quota(members.size)
        r = ratio[members]
        if r.sum() <= 0:
            if quota:
                b.meta["fallback"][_key(c)] = "uniform"
            r = np.ones(members.size)
        g = allocate(r, quota)
        seeds = np.repeat(members, g)
        b.interpolate(seeds, members, plan.k_neighbors, c)
    return b.result("adasyn")


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding. Returns (labels, centers)."""
    n = x.shape[0]
    if k > n:
        raise AugmentationError(f"clusters ({k}) exceeds number of points ({n})")
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = squared_distances(x, centers[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, squared_distances(x, centers[j:j + 1])[:, 0])
    assign = np.full(n, -1)
    for _ in range(max_iter):
        new = np.argmin(squared_distances(x, centers), axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
        for j in range(k):
            pts = x[assign == j]
            if pts.size:
                centers[j] = pts.mean(axis=0)
    return assign, centers


def kmeans_smote(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    """K-means SMOTE: SMOTE inside clusters dominated by the class.

    Each eligible cluster's share of the class quota is proportional to its
    sparsity, ``mean_pairwise_distance ** d / member_count``.
    """
    _check(data)
    rng = np.random.default_rng(plan.seed)
    b = _Builder(data, rng)
    assign, _ = kmeans(data.points, plan.clusters, rng, plan.kmeans_max_iter)
    b.meta["clusters"] = assign.tolist()
    d = data.points.shape[1]
    for c, members in _class_members(data):
        quota = plan.quota(members.size)
        eligible, weights = [], []
        for j in range(plan.clusters):
            in_cluster = assign == j
            size = int(in_cluster.sum())
            cm = np.flatnonzero(in_cluster & (data.labels == c))
            if size == 0 or cm.size < 2 or cm.size / size <= plan.kmeans_threshold:
                continue
            dist = np.sqrt(squared_distances(data.points[cm], data.points[cm]))
            mean_dist = dist[np.triu_indices(cm.size, 1)].mean()
            eligible.append(cm)
            weights.append(mean_dist ** d / cm.size)
        if not eligible:
            if quota:
                b.meta["fallback"][_key(c)] = "smote"
            _smote_class(b, c, members, quota, plan.k_neighbors)
            continue
        w = np.asarray(weights)
        if w.sum() <= 0:
            w = np.ones_like(w)
        for cm, share in zip(eligible, allocate(w, quota)):
            _smote_class(b, c, cm, int(share), plan.k_neighbors)
    return b.result("kmeans-smote")


def gaussian_noise(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    """Noisy copies of randomly drawn originals, i.i.d. N(0, noise_sigma^2) per coordinate."""
    _check(data)
    rng = np.random.default_rng(plan.seed)
    b = _Builder(data, rng)
    for c, members in _class_members(data):
        seeds = _uniform_seeds(members, plan.quota(members.size), rng)
        for s in seeds:
            noise = rng.normal(0.0, plan.noise_sigma, data.points.shape[1]) if plan.noise_sigma > 0 else 0.0
            b._add(data.points[s] + noise, c, int(s), int(s), math.nan)
    return b.result("gaussian")


# -- cleaners ----------------------------------------------------------------

def tomek_links(data: LabeledSet) -> list[tuple[int, int]]:
    """Cross-class pairs of mutual nearest neighbours, as ``(i, j)`` with i < j."""
    if len(data) < 2:
        return []
    nn = nearest_neighbors(data.points, 1)[:, 0]
    links = []
    for i, j in enumerate(nn):
        if i < j and nn[j] == i and data.labels[i] != data.labels[j]:
            links.append((i, int(j)))
    return links


def tomek_clean(data: LabeledSet) -> LabeledSet:
    """Remove, from each Tomek link, the member whose class is currently larger.

    Counts are taken before any removal; links between equally sized classes
    are left alone.
    """
    links = tomek_links(data)
    counts = {c: int(np.sum(data.labels == c)) for c in data.classes}
    drop = set()
    for i, j in links:
        ci, cj = data.labels[i], data.labels[j]
        if counts[ci] > counts[cj]:
            drop.add(i)
        elif counts[cj] > counts[ci]:
            drop.add(j)
    keep = np.array([i for i in range(len(data)) if i not in drop], dtype=int)
    out = data.subset(keep)
    out.meta["tomek_links"] = links
    out.meta["removed_rows"] = sorted(drop)
    return out


def enn_clean(data: LabeledSet, enn_k: int = 3) -> LabeledSet:
    """Edited nearest neighbours: drop points not in their neighbourhood's unique plurality class."""
    n = len(data)
    if n <= enn_k:
        raise AugmentationError(f"ENN needs more than enn_k={enn_k} points")
    nn = nearest_neighbors(data.points, enn_k)
    classes = data.classes
    code = np.searchsorted(classes, data.labels)
    votes = np.zeros((n, classes.size), dtype=int)
    np.add.at(votes, (np.repeat(np.arange(n), enn_k), code[nn].ravel()), 1)
    top = votes.max(axis=1)
    unique_top = np.sum(votes == top[:, None], axis=1) == 1
    agrees = unique_top & (votes[np.arange(n), code] == top)
    out = data.subset(np.flatnonzero(agrees))
    out.meta["removed_rows"] = np.flatnonzero(~agrees).tolist()
    return out


def _compose(data, plan, cleaner, name):
    over = smote(data, plan)
    cleaned = cleaner(over)
    removed_rows = cleaned.meta.get("removed_rows", [])
    meta = dict(over.meta)
    meta["method"] = name
    meta["removed"] = {}
    for r in removed_rows:
        key = _key(over.labels[r])
        meta["removed"][key] = meta["removed"].get(key, 0) + 1
    meta["removed_rows"] = removed_rows
    meta["removed_synthetic"] = int(np.sum(over.synthetic[removed_rows])) if removed_rows else 0
    meta["n_before_cleaning"] = len(over)
    return replace(cleaned, meta=meta)


def smote_tomek(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    return _compose(data, plan, tomek_clean, "smote-tomek")


def smote_enn(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    return _compose(data, plan, lambda s: enn_clean(s, plan.enn_k), "smote-enn")


_DISPATCH = {
    "smote": smote,
    "borderline": borderline_smote,
    "svm-smote": svm_smote,
    "adasyn": adasyn,
    "kmeans-smote": kmeans_smote,
    "smote-tomek": smote_tomek,
    "smote-enn": smote_enn,
    "gaussian": gaussian_noise,
}


def augment(data: LabeledSet, plan: AugmentationPlan) -> LabeledSet:
    """Apply ``plan.method`` to ``data``; ``"none"`` returns the set unchanged."""
    if plan.method == "none":
        return LabeledSet(data.points, data.labels, data.synthetic, data.parents, data.step,
                          {"method": "none", "added": {}, "removed": {}, "fallback": {}})
    return _DISPATCH[plan.method](data, plan)
