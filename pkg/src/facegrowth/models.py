"""From-scratch classifiers behind one fit / predict_proba / predict interface.

Model menu notation: ``MLP``, ``MLP(20)``, ``MLP(50, 10)`` (no, one or two
hidden layers), ``LR``, ``DT``, ``NN(k)``, ``RF(t)``. ``SVM`` and ``XGB(r)``
parse but are not implemented.

MLP training: ReLU on every layer before the softmax output, full-batch Adam
on mean cross-entropy, 20% stratified validation split, early stopping after
50 epochs without a strict decrease of the validation loss, best-epoch
parameters restored, at most 10 000 epochs.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from .augment import nearest_neighbors, squared_distances

SCHEMA = 1
KINDS = ("mlp", "logreg", "knn", "tree", "forest", "svm", "xgb")


class ModelError(ValueError):
    pass


class DivergenceError(ModelError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str
    hidden: tuple[int, ...] = ()
    k: int = 5
    max_iter: int = 2000
    tol: float = 1e-8
    max_depth: int | None = None
    n_trees: int = 100
    max_features: int | str | None = "sqrt"
    seed: int = 0
    validation_fraction: float = 0.2
    patience: int = 50
    max_epochs: int = 10_000
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-7

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown classifier kind {self.kind!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def name(self) -> str:
        if self.kind == "mlp":
            return "MLP" + (f"({', '.join(map(str, self.hidden))})" if self.hidden else "")
        if self.kind == "knn":
            return f"NN({self.k})"
        if self.kind == "forest":
            return f"RF({self.n_trees})"
        if self.kind == "xgb":
            return f"XGB({self.n_trees})"
        return {"logreg": "LR", "tree": "DT", "svm": "SVM"}[self.kind]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", ()))
        return cls(**d)


_MENU_RE = re.compile(r"^\s*([A-Za-z]+)\s*(?:\(([^)]*)\))?\s*$")


def parse_model(text: str, seed: int = 0, **overrides) -> ClassifierConfig:
    """Parse menu notation such as ``"MLP(50, 10)"`` or ``"NN(3)"``."""
    m = _MENU_RE.match(text)
    if not m:
        raise ModelError(f"cannot parse model spec {text!r}")
    head = m.group(1).upper()
    args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    try:
        nums = [int(a) for a in args]
    except ValueError:
        raise ModelError(f"non-integer argument in model spec {text!r}") from None
    if head == "MLP":
        cfg = ClassifierConfig("mlp", hidden=tuple(nums), seed=seed)
    elif head in ("NN", "KNN"):
        cfg = ClassifierConfig("knn", k=nums[0] if nums else 5, seed=seed)
    elif head == "LR":
        cfg = ClassifierConfig("logreg", max_iter=nums[0] if nums else 2000, seed=seed)
    elif head == "DT":
        cfg = ClassifierConfig("tree", max_depth=nums[0] if nums else None, seed=seed)
    elif head == "RF":
        cfg = ClassifierConfig("forest", n_trees=nums[0] if nums else 100, seed=seed)
    elif head == "SVM":
        cfg = ClassifierConfig("svm", seed=seed)
    elif head == "XGB":
        cfg = ClassifierConfig("xgb", n_trees=nums[0] if nums else 100, seed=seed)
    else:
        raise ModelError(f"unknown model {head!r}")
    return replace(cfg, **overrides) if overrides else cfg


FULL_MENU = ("MLP", "MLP(20)", "MLP(50)", "MLP(100)", "MLP(50, 10)", "MLP(50, 20)", "MLP(50, 50)",
              "SVM", "LR", "DT", "NN(3)", "NN(5)", "RF(100)", "RF(300)", "XGB(100)", "XGB(300)")
IMPLEMENTED_MENU = tuple(m for m in FULL_MENU if not m.startswith(("SVM", "XGB")))


# -- shared helpers -----------------------------------------------------------

def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def one_hot(codes: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((codes.size, k))
    out[np.arange(codes.size), codes] = 1.0
    return out


def cross_entropy(logits: np.ndarray, onehot: np.ndarray) -> float:
    return float(-np.sum(onehot * log_softmax(logits)) / logits.shape[0])


class Classifier:
    """Base class: label encoding, shape checks and JSON persistence."""

    kind = "base"

    def __init__(self, config: ClassifierConfig):
        self.config = config
        self.classes_: np.ndarray | None = None
        self.n_features_: int | None = None
        self.metadata: dict = {}

    def _encode(self, X, y, classes=None):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y).ravel()
        if X.shape[0] != y.shape[0]:
            raise ModelError("X and y differ in length")
        if not np.all(np.isfinite(X)):
            raise ModelError("X contains non-finite values")
        self.classes_ = np.unique(y) if classes is None else np.asarray(classes)
        if self.classes_.size < 2:
            raise ModelError("need at least two classes to fit a classifier")
        self.n_features_ = X.shape[1]
        return X, np.searchsorted(self.classes_, y)

    def _check_X(self, X) -> np.ndarray:
        if self.classes_ is None:
            raise ModelError("model is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.n_features_:
            raise ModelError(f"expected {self.n_features_} features, got {X.shape[1]}")
        return X

    def fit(self, X, y):
        raise NotImplementedError

    def predict_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest class index
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def score(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y).ravel()))

    # persistence
    def _params(self) -> dict:
        raise NotImplementedError

    def _load_params(self, params: dict) -> None:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.config.kind,
            "config": self.config.to_dict(),
            "classes": self.classes_.tolist(),
            "n_features": self.n_features_,
            "params": self._params(),
            "metadata": _jsonable(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Classifier":
        if d.get("schema") != SCHEMA:
            raise ModelError(f"unsupported model schema {d.get('schema')!r}")
        model = make_classifier(ClassifierConfig.from_dict(d["config"]))
        model.classes_ = np.asarray(d["classes"])
        model.n_features_ = int(d["n_features"])
        model.metadata = dict(d.get("metadata", {}))
        model._load_params(d["params"])
        return model


def _arr(a: np.ndarray) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(d: dict, dtype=float) -> np.ndarray:
    return np.asarray(d["data"], dtype=dtype).reshape(d["shape"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_model(model: Classifier, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()), encoding="utf-8")


def load_model(path) -> Classifier:
    return Classifier.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- multilayer perceptron --------------------------------------------------------

def init_mlp(sizes, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-uniform weights, zero biases, for layer sizes ``[n_in, h1, ..., n_out]``."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / fan_in)
        params.append((rng.uniform(-limit, limit, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def mlp_forward(params, X):
    """Return (logits, activations) where activations[i] feeds layer i."""
    acts = [X]
    a = X
    for i, (W, b) in enumerate(params):
        z = a @ W + b
        if i < len(params) - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            return z, acts
    raise ModelError("network has no layers")


def mlp_loss_and_grads(params, X, Y):
    """Mean cross-entropy and its gradient w.r.t. every (W, b)."""
    logits, acts = mlp_forward(params, X)
    n = X.shape[0]
    loss = float(-np.sum(Y * log_softmax(logits)) / n)
    delta = (softmax(logits) - Y) / n
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


class EarlyStopping:
    """Patience rule: stop once ``patience`` epochs pass without a strict decrease."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, loss: float) -> tuple[bool, bool]:
        """Record ``loss`` for ``epoch``; returns (improved, should_stop)."""
        if loss < self.best:
            self.best, self.best_epoch, self.wait = loss, epoch, 0
            return True, False
        self.wait += 1
        return False, self.wait >= self.patience


def stratified_split(codes: np.ndarray, fraction: float, rng: np.random.Generator):
    """Per-class hold-out of round(fraction * n_c) items (at least one when n_c >= 2)."""
    train, val = [], []
    for c in np.unique(codes):
        idx = rng.permutation(np.flatnonzero(codes == c))
        if idx.size < 2:
            warnings.warn(f"class {c} has {idx.size} sample(s); kept out of the validation split", stacklevel=3)
            train.extend(idx.tolist())
            continue
        n_val = min(idx.size - 1, max(1, int(round(fraction * idx.size))))
        val.extend(idx[:n_val].tolist())
        train.extend(idx[n_val:].tolist())
    return np.sort(np.array(train, int)), np.sort(np.array(val, int))


class MLPClassifier(Classifier):
    kind = "mlp"

    def fit(self, X, y, validation_data=None):
        """Train with Adam and early stopping.

        ``validation_data=(X_val, y_val)`` replaces the internal stratified
        hold-out; all of ``X`` is then used for training.
        """
        cfg = self.config
        X, codes = self._encode(X, y)
        k = self.classes_.size
        rng = np.random.default_rng(cfg.seed)
        if validation_data is not None:
            Xt, ct = X, codes
            Xv = np.asarray(validation_data[0], dtype=float).reshape(-1, X.shape[1])
            cv = np.searchsorted(self.classes_, np.asarray(validation_data[1]).ravel())
        else:
            tr, va = stratified_split(codes, cfg.validation_fraction, rng)
            Xt, ct, Xv, cv = X[tr], codes[tr], X[va], codes[va]
        Yt, Yv = one_hot(ct, k), one_hot(cv, k)

        params = init_mlp([X.shape[1], *cfg.hidden, k], rng)
        m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        stopper = EarlyStopping(cfg.patience)
        best_params = [(W.copy(), b.copy()) for W, b in params]
        train_hist, val_hist = [], []
        b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.adam_eps
        epoch = 0
        for epoch in range(1, cfg.max_epochs + 1):
            loss, grads = mlp_loss_and_grads(params, Xt, Yt)
            if not math.isfinite(loss):
                raise DivergenceError(f"training loss became {loss} at epoch {epoch}")
            new_params = []
            for i, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                mW = b1 * m[i][0] + (1 - b1) * gW
                mb = b1 * m[i][1] + (1 - b1) * gb
                vW = b2 * v[i][0] + (1 - b2) * gW * gW
                vb = b2 * v[i][1] + (1 - b2) * gb * gb
                m[i], v[i] = (mW, mb), (vW, vb)
                corr1, corr2 = 1 - b1**epoch, 1 - b2**epoch
                W = W - lr * (mW / corr1) / (np.sqrt(vW / corr2) + eps)
                b = b - lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
                new_params.append((W, b))
            params = new_params
            val_loss = cross_entropy(mlp_forward(params, Xv)[0], Yv) if len(Xv) else loss
            if not math.isfinite(val_loss):
                raise DivergenceError(f"validation loss became {val_loss} at epoch {epoch}")
            train_hist.append(loss)
            val_hist.append(val_loss)
            improved, stop = stopper.update(epoch, val_loss)
            if improved:
                best_params = [(W.copy(), b.copy()) for W, b in params]
            if stop:
                break
        self.params_ = best_params
        self.metadata = {
            "epochs_run": epoch,
            "best_epoch": stopper.best_epoch,
            "best_val_loss": stopper.best,
            "final_train_loss": train_hist[-1] if train_hist else None,
            "train_loss": train_hist,
            "val_loss": val_hist,
        }
        return self

    def predict_proba(self, X):
        X = self._check_X(X)
        return softmax(mlp_forward(self.params_, X)[0])

    def _params(self):
        return {"layers": [{"W": _arr(W), "b": _arr(b)} for W, b in self.params_]}

    def _load_params(self, params):
        self.params_ = [(_unarr(p["W"]), _unarr(p["b"])) for p in params["layers"]]


# -- logistic regression ----------------------------------------------------------

def logreg_loss_and_grad(W, b, X, Y):
    """Mean multinomial cross-entropy of ``softmax(X W + b)`` and its gradient."""
    # classes-by-samples layout keeps the per-row reductions contiguous
    z = W.T @ X.T + b[:, None]
    z -= z.max(axis=0)
    e = np.exp(z)
    s = e.sum(axis=0)
    n = X.shape[0]
    loss = float((np.log(s).sum() - np.einsum("ij,ji->", Y, z)) / n)
    r = (e / s - Y.T) / n
    return loss, (r @ X).T, r.sum(axis=1)


class LogisticRegression(Classifier):
    """Unregularized softmax regression; gradient descent with Armijo backtracking.

    Fitting happens on internally standardized columns and the weights are
    mapped back, which gives the same model as fitting raw columns but
    converges much faster.
    """

    kind = "logreg"

    def fit(self, X, y):
        cfg = self.config
        X, codes = self._encode(X, y)
        k = self.classes_.size
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd = np.where(sd > 1e-12, sd, 1.0)
        Z = (X - mu) / sd
        Y = one_hot(codes, k)
        W = np.zeros((Z.shape[1], k))
        b = np.zeros(k)
        loss, gW, gb = logreg_loss_and_grad(W, b, Z, Y)
        step = 1.0
        it = 0
        converged = False
        for it in range(1, cfg.max_iter + 1):
            gnorm2 = float(np.sum(gW * gW) + np.sum(gb * gb))
            if math.sqrt(gnorm2) < cfg.tol:
                converged = True
                it -= 1
                break
            step = min(step * 2.0, 1e6)
            while True:
                W1, b1 = W - step * gW, b - step * gb
                loss1, gW1, gb1 = logreg_loss_and_grad(W1, b1, Z, Y)
                if loss1 <= loss - 1e-4 * step * gnorm2 or step < 1e-12:
                    break
                step *= 0.5
            if not math.isfinite(loss1):
                raise DivergenceError(f"logistic regression loss became {loss1} at iteration {it}")
            W, b, loss, gW, gb = W1, b1, loss1, gW1, gb1
        self.coef_ = W / sd[:, None]
        self.intercept_ = b - (mu / sd) @ W
        self.metadata = {"iterations": it, "converged": converged, "final_loss": loss}
        return self

    def decision_function(self, X):
        return self._check_X(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def _params(self):
        return {"coef": _arr(self.coef_), "intercept": _arr(self.intercept_)}

    def _load_params(self, params):
        self.coef_ = _unarr(params["coef"])
        self.intercept_ = _unarr(params["intercept"])


# -- nearest neighbours -------------------------------------------------------------

class KNNClassifier(Classifier):
    """Majority vote of the k nearest training points.

    A tied vote goes to the tied class whose member appears first in the
    distance-ordered neighbour list.
    """

    kind = "knn"

    def fit(self, X, y):
        X, codes = self._encode(X, y)
        self.X_ = X.copy()
        self.codes_ = codes
        return self

    def _neighbors(self, X):
        X = self._check_X(X)
        return nearest_neighbors(self.X_, self.config.k, query=X, exclude_self=False)

    def predict_proba(self, X):
        nn = self._neighbors(X)
        votes = np.zeros((nn.shape[0], self.classes_.size))
        np.add.at(votes, (np.repeat(np.arange(nn.shape[0]), nn.shape[1]), self.codes_[nn].ravel()), 1)
        return votes / nn.shape[1]

    def predict(self, X):
        nn = self._neighbors(X)
        codes = self.codes_[nn]
        out = np.empty(nn.shape[0], dtype=int)
        for r in range(nn.shape[0]):
            counts = np.bincount(codes[r], minlength=self.classes_.size)
            tied = np.flatnonzero(counts == counts.max())
            if tied.size == 1:
                out[r] = tied[0]
            else:
                out[r] = next(c for c in codes[r] if c in tied)
        return self.classes_[out]

    def _params(self):
        return {"X": _arr(self.X_), "codes": _arr(self.codes_)}

    def _load_params(self, params):
        self.X_ = _unarr(params["X"])
        self.codes_ = _unarr(params["codes"], int)


# -- CART tree and random forest ------------------------------------------------------

def _gini_from_counts(counts: np.ndarray) -> np.ndarray:
    tot = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / tot[..., None]
    return 1.0 - np.nansum(p * p, axis=-1)


class DecisionTree(Classifier):
    """CART with Gini impurity; leaves store class frequencies."""

    kind = "tree"

    def fit(self, X, y, classes=None, rng: np.random.Generator | None = None):
        X, codes = self._encode(X, y, classes)
        cfg = self.config
        d = X.shape[1]
        mf = cfg.max_features if self.kind == "forest_member" else None
        n_try = _resolve_max_features(mf, d)
        self._rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self._n_try = n_try
        self.feature_, self.threshold_, self.left_, self.right_, self.value_ = [], [], [], [], []
        self._grow(X, codes, np.arange(X.shape[0]), 0)
        self.feature_ = np.asarray(self.feature_, int)
        self.threshold_ = np.asarray(self.threshold_, float)
        self.left_ = np.asarray(self.left_, int)
        self.right_ = np.asarray(self.right_, int)
        self.value_ = np.asarray(self.value_, float).reshape(-1, self.classes_.size)
        del self._rng
        return self

    def _new_node(self, counts):
        self.feature_.append(-1)
        self.threshold_.append(0.0)
        self.left_.append(-1)
        self.right_.append(-1)
        self.value_.append(counts / counts.sum())
        return len(self.feature_) - 1

    def _grow(self, X, codes, idx, depth):
        k = self.classes_.size
        counts = np.bincount(codes[idx], minlength=k).astype(float)
        node = self._new_node(counts)
        max_depth = self.config.max_depth
        if idx.size < 2 or np.count_nonzero(counts) == 1 or (max_depth is not None and depth >= max_depth):
            return node
        split = self._best_split(X[idx], codes[idx])
        if split is None:
            return node
        f, thr = split
        mask = X[idx, f] <= thr
        self.feature_[node] = f
        self.threshold_[node] = thr
        self.left_[node] = self._grow(X, codes, idx[mask], depth + 1)
        self.right_[node] = self._grow(X, codes, idx[~mask], depth + 1)
        return node

    def _best_split(self, X, codes):
        n, d = X.shape
        k = self.classes_.size
        if self._n_try >= d:
            features = np.arange(d)
        else:
            features = self._rng.permutation(d)[: self._n_try]
        best = None
        best_score = math.inf
        onehot = one_hot(codes, k)
        for f in features:
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            valid = np.flatnonzero(xs[1:] > xs[:-1])
            if valid.size == 0:
                continue
            left = np.cumsum(onehot[order], axis=0)[valid]
            right = onehot.sum(axis=0) - left
            nl = (valid + 1).astype(float)
            score = (nl * _gini_from_counts(left) + (n - nl) * _gini_from_counts(right)) / n
            j = int(np.argmin(score))
            if score[j] < best_score - 1e-15:
                best_score = score[j]
                lo, hi = xs[valid[j]], xs[valid[j] + 1]
                thr = lo + (hi - lo) / 2.0
                if not thr < hi:
                    thr = lo
                best = (int(f), float(thr))
        return best

    def apply(self, X) -> np.ndarray:
        X = self._check_X(X)
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature_[node] >= 0
        while np.any(active):
            f = self.feature_[node[active]]
            go_left = X[active, f] <= self.threshold_[node[active]]
            node[active] = np.where(go_left, self.left_[node[active]], self.right_[node[active]])
            active = self.feature_[node] >= 0
        return node

    def predict_proba(self, X):
        return self.value_[self.apply(X)]

    def _params(self):
        return {name: _arr(getattr(self, name + "_")) for name in ("feature", "threshold", "left", "right", "value")}

    def _load_params(self, params):
        for name in ("feature", "threshold", "left", "right", "value"):
            dtype = float if name in ("threshold", "value") else int
            setattr(self, name + "_", _unarr(params[name], dtype))


def _resolve_max_features(mf, d: int) -> int:
    if mf is None:
        return d
    if mf == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(int(mf), d))


class _ForestTree(DecisionTree):
    kind = "forest_member"


class RandomForest(Classifier):
    """Bootstrap-aggregated CART trees with per-split feature subsampling."""

    kind = "forest"

    def fit(self, X, y):
        X, codes = self._encode(X, y)
        cfg = self.config
        children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
        self.trees_ = []
        self.bootstraps_ = []
        n = X.shape[0]
        for child in children:
            rng = np.random.default_rng(child)
            boot = rng.integers(n, size=n)
            tree = _ForestTree(cfg)
            tree.fit(X[boot], self.classes_[codes[boot]], classes=self.classes_, rng=rng)
            self.trees_.append(tree)
            self.bootstraps_.append(boot)
        return self

    def predict_proba(self, X):
        X = self._check_X(X)
        return np.mean([t.predict_proba(X) for t in self.trees_], axis=0)

    def _params(self):
        return {"trees": [t._params() for t in self.trees_]}

    def _load_params(self, params):
        self.trees_ = []
        for tp in params["trees"]:
            t = _ForestTree(self.config)
            t.classes_, t.n_features_ = self.classes_, self.n_features_
            t._load_params(tp)
            self.trees_.append(t)


_CLASSES = {
    "mlp": MLPClassifier,
    "logreg": LogisticRegression,
    "knn": KNNClassifier,
    "tree": DecisionTree,
    "forest": RandomForest,
}


def make_classifier(config: ClassifierConfig | str) -> Classifier:
    if isinstance(config, str):
        config = parse_model(config)
    if config.kind in ("svm", "xgb"):
        raise NotImplementedError(f"{config.name} is listed in the model menu but is out of scope for this package")
    return _CLASSES[config.kind](config)


def fit(config: ClassifierConfig | str, X, y) -> Classifier:
    """Build the classifier described by ``config`` and train it."""
    return make_classifier(config).fit(X, y)


def gradient_check(config: ClassifierConfig | None = None, n_samples: int = 10, n_features: int = 4,
                   n_classes: int = 3, seed: int = 0, step: float = 1e-5, X=None, y=None) -> float:
    """Max relative error between backprop and central finite differences.

    Uses a small random network with ``config.hidden`` layers (logistic
    regression when there are none) on random data, unless ``X``/``y`` are given.
    """
    config = config or ClassifierConfig("mlp", hidden=(5,))
    rng = np.random.default_rng(seed)
    if X is None:
        X = rng.standard_normal((n_samples, n_features))
    if y is None:
        y = np.arange(X.shape[0]) % n_classes
    X = np.asarray(X, float)
    k = int(np.max(y)) + 1
    Y = one_hot(np.asarray(y, int), k)
    hidden = config.hidden if config.kind == "mlp" else ()
    params = init_mlp([X.shape[1], *hidden, k], rng)
    params = [(W, rng.standard_normal(b.shape) * 0.1) for W, b in params]
    _, grads = mlp_loss_and_grads(params, X, Y)
    worst = 0.0
    for li in range(len(params)):
        for pi in range(2):
            p = params[li][pi]
            g = grads[li][pi]
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = p[ix]
                p[ix] = orig + step
                lp, _ = mlp_loss_and_grads(params, X, Y)
                p[ix] = orig - step
                lm, _ = mlp_loss_and_grads(params, X, Y)
                p[ix] = orig
                num = (lp - lm) / (2 * step)
                ana = g[ix]
                denom = max(abs(num) + abs(ana), 1e-8)
                worst = max(worst, abs(num - ana) / denom)
    return worst
