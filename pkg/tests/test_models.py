import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facegrowth.models import (
    IMPLEMENTED_MENU,
    FULL_MENU,
    ClassifierConfig,
    DecisionTree,
    EarlyStopping,
    KNNClassifier,
    LogisticRegression,
    MLPClassifier,
    ModelError,
    cross_entropy,
    fit,
    gradient_check,
    init_mlp,
    load_model,
    logreg_loss_and_grad,
    make_classifier,
    mlp_forward,
    one_hot,
    parse_model,
    save_model,
    softmax,
    stratified_split,
)


def xor_fixture(seed=0, reps=50, jitter=0.05):
    rng = np.random.default_rng(seed)
    base = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    X = np.repeat(base, reps, axis=0) + rng.normal(0, jitter, size=(4 * reps, 2))
    y = np.repeat([0, 1, 1, 0], reps)
    return X, y


def separable_1d(n_per=20):
    y = np.repeat([0, 1, 2], n_per)
    return y[:, None].astype(float), y


# -- menu parsing --------------------------------------------------------------------------

@pytest.mark.parametrize("text,kind,name", [
    ("MLP", "mlp", "MLP"), ("MLP(50, 10)", "mlp", "MLP(50, 10)"), ("NN(3)", "knn", "NN(3)"),
    ("LR", "logreg", "LR"), ("DT", "tree", "DT"), ("RF(300)", "forest", "RF(300)"),
    ("SVM", "svm", "SVM"), ("XGB(100)", "xgb", "XGB(100)"),
])
def test_parse_model(text, kind, name):
    cfg = parse_model(text)
    assert cfg.kind == kind and cfg.name == name


def test_menu_covers_all_and_rejects_garbage():
    assert {parse_model(m).name for m in FULL_MENU} == set(FULL_MENU)
    assert not any(m.startswith(("SVM", "XGB")) for m in IMPLEMENTED_MENU)
    for bad in ("CNN", "MLP(a)", "MLP(("):
        with pytest.raises(ModelError):
            parse_model(bad)


def test_unimplemented_kinds():
    for m in ("SVM", "XGB(300)"):
        with pytest.raises(NotImplementedError):
            make_classifier(m)


def test_protocol_defaults():
    cfg = parse_model("MLP(20)")
    assert (cfg.validation_fraction, cfg.patience, cfg.max_epochs) == (0.2, 50, 10_000)
    assert (cfg.learning_rate, cfg.beta1, cfg.beta2) == (0.001, 0.9, 0.999)
    assert parse_model("LR").max_iter == 2000


def test_config_roundtrip():
    cfg = parse_model("MLP(50, 20)", seed=9)
    assert ClassifierConfig.from_dict(cfg.to_dict()) == cfg


# -- gradients ------------------------------------------------------------------------------

@pytest.mark.parametrize("hidden", [(), (5,), (50, 10), (7, 7, 7)])
def test_mlp_gradient_check(hidden):
    assert gradient_check(ClassifierConfig("mlp", hidden=hidden)) < 1e-5


def test_logreg_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 3))
    Y = one_hot(np.arange(12) % 3, 3)
    W, b = rng.normal(size=(3, 3)), rng.normal(size=3)
    _, gW, gb = logreg_loss_and_grad(W, b, X, Y)
    h = 1e-6
    worst = 0.0
    for arr, g in ((W, gW), (b, gb)):
        for ix in np.ndindex(arr.shape):
            orig = arr[ix]
            arr[ix] = orig + h
            lp = logreg_loss_and_grad(W, b, X, Y)[0]
            arr[ix] = orig - h
            lm = logreg_loss_and_grad(W, b, X, Y)[0]
            arr[ix] = orig
            num = (lp - lm) / (2 * h)
            worst = max(worst, abs(num - g[ix]) / max(abs(num) + abs(g[ix]), 1e-8))
    assert worst < 1e-5


def test_logreg_gradient_closed_form_at_origin():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(9, 2))
    Y = one_hot(np.arange(9) % 3, 3)
    loss, gW, gb = logreg_loss_and_grad(np.zeros((2, 3)), np.zeros(3), X, Y)
    assert loss == pytest.approx(math.log(3))
    assert np.allclose(gW, X.T @ (1 / 3 - Y) / 9, atol=1e-15)
    assert np.allclose(gb, 0.0, atol=1e-15)


def test_zero_input_gradients():
    from facegrowth.models import mlp_loss_and_grads
    rng = np.random.default_rng(2)
    params = init_mlp([3, 4, 3], rng)
    params = [(W, rng.normal(size=b.shape)) for W, b in params]
    X = np.zeros((6, 3))
    _, grads = mlp_loss_and_grads(params, X, one_hot(np.arange(6) % 3, 3))
    assert np.all(grads[0][0] == 0.0)
    assert np.any(grads[-1][1] != 0.0)


def test_he_uniform_bounds():
    params = init_mlp([8, 20, 3], np.random.default_rng(0))
    assert np.abs(params[0][0]).max() <= math.sqrt(6 / 8)
    assert np.abs(params[1][0]).max() <= math.sqrt(6 / 20)
    assert all(np.all(b == 0) for _, b in params)


# -- fitting fixtures ----------------------------------------------------------------------------

def test_logreg_separable_1d():
    X, y = separable_1d()
    m = fit("LR", X, y)
    assert m.score(X, y) == 1.0


def test_knn_separable_and_self_lookup():
    X, y = separable_1d()
    assert fit("NN(3)", X, y).score(X, y) == 1.0
    rng = np.random.default_rng(0)
    Xr = rng.normal(size=(40, 3))
    yr = rng.integers(3, size=40)
    assert fit("NN(1)", Xr, yr).score(Xr, yr) == 1.0


def test_knn_tie_goes_to_nearest_tied_class():
    X = np.array([[0.0], [1.0], [-1.5], [2.0]])
    y = np.array([0, 1, 1, 0])
    m = fit("NN(2)", X, y)
    assert m.predict([[0.4]]).tolist() == [0]
    assert m.predict([[0.6]]).tolist() == [1]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mlp20_solves_xor(seed):
    X, y = xor_fixture(seed)
    m = MLPClassifier(parse_model("MLP(20)", seed=seed)).fit(X, y)
    assert m.score(X, y) == 1.0
    assert m.metadata["epochs_run"] <= 10_000


def test_zero_hidden_mlp_agrees_with_logreg():
    X, y = separable_1d()
    Xs = (X - X.mean()) / X.std()
    a = fit(ClassifierConfig("mlp", learning_rate=0.05), Xs, y)
    b = fit("LR", Xs, y)
    assert a.score(Xs, y) == b.score(Xs, y) == 1.0


def test_trees_fit_training_data():
    X, y = xor_fixture(3)
    assert fit("DT", X, y).score(X, y) == 1.0
    assert fit("RF(25)", X, y).score(X, y) == 1.0


def test_tree_depth_limit():
    X, y = xor_fixture(4)
    stump = fit("DT(1)", X, y)
    assert stump.score(X, y) < 1.0


def test_single_class_rejected():
    X = np.zeros((5, 2))
    for m in ("LR", "MLP(3)", "NN(3)", "DT", "RF(3)"):
        with pytest.raises(ModelError):
            fit(m, X, np.zeros(5, int))


def test_dimension_mismatch():
    X, y = separable_1d()
    m = fit("LR", X, y)
    with pytest.raises(ModelError):
        m.predict(np.zeros((2, 3)))


# -- early stopping ---------------------------------------------------------------------------------

def test_patience_rule_sequence():
    es = EarlyStopping(50)
    losses = [5.0, 4.0, 3.0] + [3.0] * 60
    stopped = None
    for epoch, loss in enumerate(losses, 1):
        _, stop = es.update(epoch, loss)
        if stop:
            stopped = epoch
            break
    assert es.best_epoch == 3
    assert stopped == 3 + 50


def test_mlp_restores_best_epoch_parameters():
    # validation labels are flipped, so validation loss rises once training makes progress
    X, y = xor_fixture(5)
    flipped = 1 - y
    cfg = parse_model("MLP(10)", seed=1, learning_rate=0.01)
    m = MLPClassifier(cfg).fit(X, y, validation_data=(X, flipped))
    md = m.metadata
    e = md["best_epoch"]
    assert md["epochs_run"] == e + cfg.patience
    assert md["val_loss"][e - 1] == md["best_val_loss"] == min(md["val_loss"])
    assert all(v >= md["best_val_loss"] for v in md["val_loss"][e:])
    restored = cross_entropy(mlp_forward(m.params_, X)[0], one_hot(flipped, 2))
    assert restored == pytest.approx(md["best_val_loss"], rel=1e-12)


def test_mlp_best_loss_monotone():
    X, y = xor_fixture(6)
    m = MLPClassifier(parse_model("MLP(8)", seed=0)).fit(X, y)
    val = np.array(m.metadata["val_loss"])
    running = np.minimum.accumulate(val)
    assert np.all(np.diff(running) <= 0)
    assert m.metadata["best_val_loss"] == running[-1]


def test_stratified_validation_split():
    codes = np.repeat([0, 1, 2], [10, 50, 10])
    tr, va = stratified_split(codes, 0.2, np.random.default_rng(0))
    assert np.bincount(codes[va]).tolist() == [2, 10, 2]
    assert sorted(np.concatenate([tr, va]).tolist()) == list(range(70))


# -- probabilities, determinism, persistence -------------------------------------------------------------

MODELS = ("LR", "MLP(6)", "NN(5)", "DT", "RF(10)")


@pytest.mark.parametrize("spec", MODELS)
def test_probability_rows(spec):
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 3))
    y = rng.integers(3, size=60)
    p = fit(spec, X, y).predict_proba(rng.normal(size=(25, 3)))
    assert p.shape == (25, 3)
    assert np.all(p >= 0) and np.all(p <= 1)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("spec", MODELS)
def test_determinism_and_persistence(spec, tmp_path):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, 2))
    y = rng.integers(3, size=50)
    a = fit(parse_model(spec, seed=4), X, y)
    b = fit(parse_model(spec, seed=4), X, y)
    Xq = rng.normal(size=(20, 2))
    assert np.array_equal(a.predict_proba(Xq), b.predict_proba(Xq))
    save_model(a, tmp_path / "m.json")
    c = load_model(tmp_path / "m.json")
    assert np.array_equal(a.predict_proba(Xq), c.predict_proba(Xq))
    assert np.array_equal(a.predict(Xq), c.predict(Xq))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=2, max_size=8))
def test_softmax_stable(row):
    p = softmax(np.array([row]))
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_string_labels_supported():
    X, y = separable_1d()
    names = np.array(["Horizontal", "Mixed", "Vertical"])[y]
    m = fit("LR", X, names)
    assert m.predict([[0.0], [2.0]]).tolist() == ["Horizontal", "Vertical"]


def test_single_tree_forest_equals_its_tree():
    X, y = xor_fixture(9, jitter=0.2)
    forest = fit(ClassifierConfig("forest", n_trees=1, max_features=None, seed=3), X, y)
    boot = forest.bootstraps_[0]
    tree = fit(ClassifierConfig("tree"), X[boot], y[boot])
    Xq = np.random.default_rng(1).uniform(-0.5, 1.5, size=(200, 2))
    assert np.array_equal(forest.predict(Xq), tree.predict(Xq))
    assert np.array_equal(forest.predict_proba(Xq), tree.predict_proba(Xq))
