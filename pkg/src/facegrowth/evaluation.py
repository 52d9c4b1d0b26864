"""Repeated stratified cross-validation, significance tests and feature selection.

Every (repeat, fold) unit draws its randomness from ``(master_seed, repeat)``
for the fold assignment and ``(master_seed, repeat, fold, stream)`` for the
augmenter and the classifier, so results do not depend on execution order.
Standardizers are fitted on training folds only and augmentation touches
training folds only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import betainc

from .augment import AugmentationPlan, LabeledSet, augment
from .features import AGE_COLUMN, FeatureMatrix, standardize_fit
from .models import ClassifierConfig, make_classifier, parse_model

# Reference values reported for the proprietary growth-study data. They cannot
# be reproduced without that data and are carried for report annotation.
REFERENCE = {
    "mfc_share": 0.6823,
    "n_samples": 639,
    "baseline_original": 0.7364,
    "baseline_standardized": 0.7345,
    "augmentation_peak": 0.7406,
    "expert_accuracy": (0.4033, 0.4088),
    "expert_consistency": 0.4696,
}


class StratificationError(ValueError):
    pass


class DegenerateVarianceError(ValueError):
    pass


class ExperimentError(RuntimeError):
    def __init__(self, message, repeat=None, fold=None):
        super().__init__(message)
        self.repeat = repeat
        self.fold = fold


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    repeats: int = 20
    master_seed: int = 0

    def __post_init__(self):
        if self.folds < 1:
            raise ValueError("folds must be >= 1 (1 = train on everything, test on everything)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    classifier: ClassifierConfig
    features: tuple[str, ...]
    plan: AugmentationPlan = field(default_factory=AugmentationPlan)
    standardize: bool = False
    include_age: bool = True
    cv: CVConfig = field(default_factory=CVConfig)

    def __post_init__(self):
        if isinstance(self.classifier, str):
            object.__setattr__(self, "classifier", parse_model(self.classifier))
        feats = (self.features,) if isinstance(self.features, str) else tuple(self.features)
        if not feats:
            raise ValueError("feature subset must not be empty")
        object.__setattr__(self, "features", feats)

    def columns(self, available: Sequence[str]) -> list[str]:
        cols = list(self.features)
        if self.include_age and AGE_COLUMN in available and AGE_COLUMN not in cols:
            cols.append(AGE_COLUMN)
        return cols

    def to_dict(self) -> dict:
        plan = {k: getattr(self.plan, k) for k in self.plan.__dataclass_fields__}
        plan["factor"] = float(plan["factor"])
        return {
            "classifier": self.classifier.to_dict(),
            "model": self.classifier.name,
            "features": list(self.features),
            "plan": plan,
            "standardize": self.standardize,
            "include_age": self.include_age,
            "cv": {"folds": self.cv.folds, "repeats": self.cv.repeats, "master_seed": self.cv.master_seed},
        }


@dataclass
class ExperimentResult:
    runs: np.ndarray
    config: ExperimentConfig
    seeds: dict
    baseline_runs: np.ndarray | None = None
    recall: np.ndarray | None = None     # per run and class, diagnostics only
    classes: np.ndarray | None = None

    def __post_init__(self):
        self.runs = np.asarray(self.runs, dtype=float)

    @property
    def mean(self) -> float:
        return float(np.mean(self.runs))

    @property
    def sd(self) -> float:
        """Sample standard deviation of the run accuracies."""
        return float(np.std(self.runs, ddof=1)) if self.runs.size > 1 else 0.0

    def __len__(self):
        return self.runs.size

    def to_dict(self) -> dict:
        out = {
            "schema": 1,
            "config": self.config.to_dict(),
            "runs": self.runs.tolist(),
            "mean": self.mean,
            "sd": self.sd,
            "seeds": self.seeds,
            "reference": {k: (list(v) if isinstance(v, tuple) else v) for k, v in REFERENCE.items()},
        }
        if self.baseline_runs is not None:
            out["baseline"] = float(np.mean(self.baseline_runs))
            try:
                out["p_vs_baseline"] = t_test(self.runs, self.baseline_runs).pvalue
            except DegenerateVarianceError:
                out["p_vs_baseline"] = None
        if self.recall is not None:
            out["recall_mean"] = {str(c): float(v) for c, v in zip(self.classes, np.nanmean(self.recall, axis=0))}
        return out


# -- splitting ------------------------------------------------------------------

def stratified_kfold(labels, folds: int, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled stratified k-fold partition.

    Within each class the members are shuffled and dealt round-robin; the
    dealing position carries over between classes, so per-class counts and
    overall fold sizes both differ by at most one.
    """
    y = np.asarray(labels).ravel()
    if folds < 2:
        raise StratificationError("stratified_kfold needs folds >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    assign = np.empty(y.size, dtype=int)
    offset = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if idx.size < folds:
            raise StratificationError(f"class {c!r} has {idx.size} member(s), fewer than {folds} folds")
        idx = rng.permutation(idx)
        assign[idx] = (offset + np.arange(idx.size)) % folds
        offset = (offset + idx.size) % folds
    out = []
    for f in range(folds):
        test = np.flatnonzero(assign == f)
        train = np.flatnonzero(assign != f)
        out.append((train, test))
    return out


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0])


def cv_splits(labels, cv: CVConfig) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Fold partitions for every repeat (``folds == 1`` trains and tests on everything)."""
    y = np.asarray(labels)
    if cv.folds == 1:
        allidx = np.arange(y.size)
        return [[(allidx, allidx)] for _ in range(cv.repeats)]
    return [stratified_kfold(y, cv.folds, np.random.default_rng([cv.master_seed, r])) for r in range(cv.repeats)]


# -- experiments ---------------------------------------------------------------

def _xy(data, columns):
    if isinstance(data, FeatureMatrix):
        if data.labels is None:
            raise ValueError("feature matrix has no labels")
        cols = [data.column_index(c) for c in columns]
        return data.values[:, cols], data.labels
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y)


def run_experiment(cfg: ExperimentConfig, data, *, splits=None,
                   on_unit: Callable | None = None) -> ExperimentResult:
    """Cross-validated accuracy of one configuration.

    ``data`` is a labeled :class:`FeatureMatrix` (columns picked by
    ``cfg.features``, plus age when ``cfg.include_age``) or an ``(X, y)``
    pair used as is. Per unit: fit a standardizer on the training fold (if
    requested), augment the training fold, fit, score on the test fold.

    ``on_unit(repeat, fold, train_idx, test_idx, info)`` is called after each
    unit with the fitted standardizer, augmented training set and model.
    """
    if isinstance(data, FeatureMatrix):
        columns = cfg.columns(data.columns)
    else:
        columns = list(cfg.features)
    X, y = _xy(data, columns)
    if splits is None:
        splits = cv_splits(y, cfg.cv)
    classes = np.unique(y)
    runs, base_runs, recalls = [], [], []
    unit_seeds = []
    for r, partition in enumerate(splits):
        for f, (tr, te) in enumerate(partition):
            aug_seed = _seed(cfg.cv.master_seed, r, f, 1)
            clf_seed = _seed(cfg.cv.master_seed, r, f, 2)
            unit_seeds.append([aug_seed, clf_seed])
            try:
                Xtr, Xte = X[tr], X[te]
                scaler = None
                if cfg.standardize:
                    scaler = standardize_fit(Xtr)
                    Xtr, Xte = scaler.apply(Xtr), scaler.apply(Xte)
                train_set = augment(LabeledSet(Xtr, y[tr]), replace(cfg.plan, seed=aug_seed))
                model = make_classifier(replace(cfg.classifier, seed=clf_seed))
                model.fit(train_set.points, train_set.labels)
                pred = model.predict(Xte)
            except Exception as exc:
                raise ExperimentError(f"repeat {r}, fold {f}: {type(exc).__name__}: {exc}", r, f) from exc
            truth = y[te]
            runs.append(float(np.mean(pred == truth)))
            vals, counts = np.unique(y[tr], return_counts=True)
            base_runs.append(float(np.mean(truth == vals[np.argmax(counts)])))
            rec = [float(np.mean(pred[truth == c] == c)) if np.any(truth == c) else np.nan for c in classes]
            recalls.append(rec)
            if on_unit is not None:
                on_unit(r, f, tr, te, {"scaler": scaler, "train_set": train_set, "model": model,
                                       "X_test": Xte, "pred": pred})
    seeds = {"master_seed": cfg.cv.master_seed, "units": unit_seeds}
    return ExperimentResult(np.array(runs), cfg, seeds, np.array(base_runs), np.array(recalls), classes)


def mfc_baseline(labels) -> float:
    """Accuracy of always predicting the most frequent class."""
    y = np.asarray(labels).ravel()
    if y.size == 0:
        raise ValueError("mfc_baseline needs at least one label")
    _, counts = np.unique(y, return_counts=True)
    return float(counts.max() / y.size)


# -- significance ---------------------------------------------------------------

class TTest(NamedTuple):
    statistic: float
    pvalue: float


def t_test(a, b, equal_var: bool = True) -> TTest:
    """Two-sample, two-tailed t-test (Student's; Welch's with ``equal_var=False``).

    The p-value is ``I_x(df/2, 1/2)`` with ``x = df / (df + t^2)``, the
    regularized incomplete beta form of the t distribution tail.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("t_test needs at least two values per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    if equal_var:
        df = na + nb - 2
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = pooled * (1.0 / na + 1.0 / nb)
    else:
        se2 = va / na + vb / nb
        df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)) if se2 > 0 else math.nan
    if not se2 > 0:
        raise DegenerateVarianceError("pooled variance is zero")
    t = float(diff / math.sqrt(se2))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTest(t, min(1.0, p))


def significantly_better(a, b, alpha: float = 0.05) -> bool:
    """Mean of ``a`` above mean of ``b`` with p < alpha."""
    if np.mean(a) <= np.mean(b):
        return False
    try:
        return t_test(a, b).pvalue < alpha
    except DegenerateVarianceError:
        return True


# -- forward selection ------------------------------------------------------------

@dataclass
class StageRow:
    model: str
    features: tuple[str, ...]
    result: ExperimentResult

    @property
    def feature(self) -> str:
        return self.features[-1]

    @property
    def family(self) -> str:
        return self.feature.split(":", 1)[0] if ":" in self.feature else ""

    @property
    def mean(self) -> float:
        return self.result.mean

    @property
    def sd(self) -> float:
        return self.result.sd


@dataclass
class Stage:
    index: int
    fixed: tuple[str, ...]
    rows: list[StageRow]
    p_vs_previous: float | None = None
    advanced: bool = True

    @property
    def best(self) -> StageRow:
        return self.rows[0]

    def top(self, n: int = 10) -> list[StageRow]:
        return self.rows[:n]


@dataclass
class SelectionResult:
    stages: list[Stage]
    selected: tuple[str, ...]
    best: StageRow
    stop_reason: str

    def table_rows(self, top_n: int = 10) -> list[dict]:
        out = []
        for st in self.stages:
            for rank, row in enumerate(st.top(top_n), 1):
                out.append({"stage": st.index, "rank": rank, "model": row.model, "feature": row.feature,
                            "family": row.family, "mean": row.mean, "sd": row.sd})
        return out


def forward_selection(
    data: FeatureMatrix,
    candidates: Sequence[str],
    models: Sequence[str | ClassifierConfig],
    cv: CVConfig = CVConfig(),
    *,
    fixed: Sequence[str] = (),
    plan: AugmentationPlan = AugmentationPlan(),
    standardize: bool = False,
    include_age: bool = True,
    alpha: float = 0.05,
    max_stages: int | None = None,
    progress: Callable | None = None,
) -> SelectionResult:
    """Staged forward selection over (model kind, feature) pairs.

    Stage 1 tries every model on every single candidate. Each later stage
    keeps the previous winner's feature set and adds one more candidate,
    again across all models. Selection stops after the first stage whose
    winner is not significantly better (t-test, ``alpha``) than the previous
    winner, or when candidates run out.
    """
    candidates = list(dict.fromkeys(candidates))
    if not candidates:
        raise ValueError("empty candidate pool")
    configs = [parse_model(m) if isinstance(m, str) else m for m in models]
    if not configs:
        raise ValueError("empty model menu")
    splits = cv_splits(data.labels, cv)
    current = tuple(fixed)
    stages: list[Stage] = []
    prev_best: StageRow | None = None
    reason = "candidates exhausted"
    while True:
        pool = [c for c in candidates if c not in current]
        if not pool:
            break
        rows = []
        for feat in pool:
            for mc in configs:
                cfg = ExperimentConfig(mc, current + (feat,), plan, standardize, include_age, cv)
                res = run_experiment(cfg, data, splits=splits)
                rows.append(StageRow(mc.name, current + (feat,), res))
                if progress is not None:
                    progress(len(stages) + 1, rows[-1])
        order = sorted(range(len(rows)), key=lambda i: (-rows[i].mean, rows[i].sd, i))
        stage = Stage(len(stages) + 1, current, [rows[i] for i in order])
        stages.append(stage)
        if prev_best is not None:
            try:
                stage.p_vs_previous = t_test(stage.best.result.runs, prev_best.result.runs).pvalue
            except DegenerateVarianceError:
                stage.p_vs_previous = None
            if not significantly_better(stage.best.result.runs, prev_best.result.runs, alpha):
                stage.advanced = False
                reason = f"stage {stage.index} not significantly better than stage {stage.index - 1}"
                break
        prev_best = stage.best
        current = stage.best.features
        if max_stages is not None and len(stages) >= max_stages:
            reason = "max_stages reached"
            break
    return SelectionResult(stages, current, prev_best, reason)


# -- augmentation sweeps -------------------------------------------------------------

@dataclass
class SweepRow:
    method: str
    factor: float
    noise_sigma: float
    result: ExperimentResult
    p_vs_baseline: float | None

    @property
    def label(self) -> str:
        return f"gaussian:{self.noise_sigma:g}" if self.method == "gaussian" else self.method


@dataclass
class SweepResult:
    baseline: ExperimentResult
    rows: list[SweepRow]

    def table_rows(self) -> list[dict]:
        return [{"method": r.label, "factor": r.factor, "mean": r.result.mean, "sd": r.result.sd}
                for r in self.rows]


NOISE_LEVELS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)


def factor_sweep(
    base: ExperimentConfig,
    data,
    methods: Sequence[str],
    factors: Sequence[float],
    noise_levels: Sequence[float] = NOISE_LEVELS,
    progress: Callable | None = None,
) -> SweepResult:
    """Accuracy against augmentation factor for each method.

    The non-augmented configuration is evaluated once as the baseline; each
    row carries its p-value against it. Gaussian noise is swept over
    ``noise_levels`` as well.
    """
    y = data.labels if isinstance(data, FeatureMatrix) else np.asarray(data[1])
    splits = cv_splits(y, base.cv)
    baseline = run_experiment(replace(base, plan=replace(base.plan, method="none", factor=1)), data, splits=splits)
    rows = []
    for method in methods:
        sigmas = noise_levels if method == "gaussian" else (base.plan.noise_sigma,)
        for sigma in sigmas:
            for factor in factors:
                plan = replace(base.plan, method=method, factor=factor, noise_sigma=sigma)
                res = run_experiment(replace(base, plan=plan), data, splits=splits)
                try:
                    p = t_test(res.runs, baseline.runs).pvalue
                except DegenerateVarianceError:
                    p = None
                rows.append(SweepRow(method, float(factor), float(sigma), res, p))
                if progress is not None:
                    progress(rows[-1])
    return SweepResult(baseline, rows)


# -- rater agreement ------------------------------------------------------------------

class Agreement(NamedTuple):
    accuracy_a: float
    accuracy_b: float
    consistency: float


def rater_agreement(pred_a, pred_b, truth) -> Agreement:
    """Accuracy of two raters and the share of cases they label identically."""
    a, b, t = (np.asarray(v).ravel() for v in (pred_a, pred_b, truth))
    if not (a.size == b.size == t.size):
        raise ValueError("prediction and truth lengths differ")
    if a.size == 0:
        raise ValueError("no predictions")
    return Agreement(float(np.mean(a == t)), float(np.mean(b == t)), float(np.mean(a == b)))


def expert_fixture(n: int = 181, agree: int = 85, correct_a: int = 73, correct_b: int = 74,
                   both_correct: int = 40, seed: int = 0):
    """Three-class truth and two rater label vectors with prescribed counts.

    The defaults give accuracies 73/181 and 74/181 and consistency 85/181, the
    reference expert-rater rates in ``REFERENCE``.
    """
    only_a = correct_a - both_correct
    only_b = correct_b - both_correct
    agree_wrong = agree - both_correct
    neither = n - agree - only_a - only_b
    if min(only_a, only_b, agree_wrong, neither) < 0:
        raise ValueError("inconsistent agreement counts")
    rng = np.random.default_rng(seed)
    truth = rng.integers(3, size=n)
    a = np.empty(n, int)
    b = np.empty(n, int)
    kinds = np.repeat(np.arange(5), [both_correct, agree_wrong, only_a, only_b, neither])
    for i, kind in enumerate(kinds):
        t = truth[i]
        w1, w2 = (t + 1) % 3, (t + 2) % 3
        if kind == 0:
            a[i] = b[i] = t
        elif kind == 1:
            a[i] = b[i] = w1
        elif kind == 2:
            a[i], b[i] = t, w1
        elif kind == 3:
            a[i], b[i] = w1, t
        else:
            a[i], b[i] = w1, w2
    perm = rng.permutation(n)
    return a[perm], b[perm], truth[perm]
