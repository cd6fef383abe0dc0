import numpy as np
import pytest

from helpers import reference_predict, reference_tree
from nidsguard.models import (ClassifierSpec, DivergenceError, ModelError, TrainedModel,
                              analytic_gradients, fit, gradient_check, sample_spec, within_space)

FAST = {
    "logistic_regression": {"epochs": 40},
    "linear_svm": {"epochs": 40},
    "decision_tree": {},
    "random_forest": {"n_estimators": 7},
    "mlp": {"hidden": (8, 4), "epochs": 30},
}


def _blobs(n=300, d=4, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.4).astype(float)
    X = rng.normal(0, 1, (n, d)) + 1.5 * y[:, None]
    return X, y


@pytest.mark.parametrize("seed", range(40))
def test_tree_matches_exhaustive_split_search(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(8, 2))
    y = rng.integers(0, 2, size=8)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    max_depth = int(rng.integers(1, 6))
    ref = reference_tree(X.tolist(), y.tolist(), list(range(8)), 0, max_depth, 1)
    model = fit(ClassifierSpec("decision_tree", {"max_depth": max_depth, "min_samples_leaf": 1}),
                (X.astype(float), y.astype(float)))
    grid = np.array([(a, b) for a in np.arange(-1, 6, 0.5) for b in np.arange(-1, 6, 0.5)])
    got = model.predict_proba(grid)
    expect = np.array([float(reference_predict(ref, g)) for g in grid])
    assert np.array_equal(got, expect)


def test_tree_separates_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    m = fit(ClassifierSpec("decision_tree", {"min_samples_leaf": 1}), (X, y))
    assert m.predict_proba(X).tolist() == y.tolist()


def test_tree_invariant_under_monotone_transform():
    X, y = _blobs(400, 3, seed=3)
    spec = ClassifierSpec("decision_tree", {"max_depth": 6})
    a = fit(spec, (X, y)).predict_proba(X)
    b = fit(spec, (np.exp(X) * 3.0 + 1.0, y)).predict_proba(np.exp(X) * 3.0 + 1.0)
    assert np.array_equal(a, b)


def test_forest_of_one_unbagged_tree_equals_tree():
    X, y = _blobs(300, 5, seed=4)
    t = fit(ClassifierSpec("decision_tree", {"max_depth": 7}, seed=1), (X, y))
    f = fit(ClassifierSpec("random_forest", {"n_estimators": 1, "bootstrap": False,
                                             "max_features": None, "max_depth": 7}, seed=9), (X, y))
    assert np.array_equal(t.predict_proba(X), f.predict_proba(X))


# ---------------------------------------------------------------------------
# gradients


@pytest.mark.parametrize("family,hp", [("logistic_regression", {"l2": 1e-3}),
                                       ("linear_svm", {"l2": 1e-3}),
                                       ("mlp", {"hidden": (6, 5), "l2": 1e-3})])
def test_gradient_check_random_batches(family, hp):
    X, y = _blobs(400, 5, seed=5)
    rng = np.random.default_rng(0)
    for k in range(10):
        idx = rng.choice(len(y), size=32, replace=False)
        err = gradient_check(ClassifierSpec(family, hp, seed=k), X[idx], y[idx])
        assert err < 1e-4, (family, k, err)


def test_mlp_zero_weights_zero_inputs_zero_first_layer_gradient():
    spec = ClassifierSpec("mlp", {"hidden": (4, 3), "bias": False})
    Ws = [np.zeros((3, 4)), np.zeros((4, 3)), np.zeros((3, 1))]
    gW, _ = analytic_gradients(spec, np.zeros((5, 3)), np.array([0, 1, 1, 0, 1.0]),
                               {"W": Ws, "b": [None, None, None]})
    assert np.all(gW[0] == 0.0)


# ---------------------------------------------------------------------------
# contract


@pytest.mark.parametrize("family", ["logistic_regression", "decision_tree", "random_forest"])
def test_label_flip_symmetry(family):
    X, y = _blobs(300, 4, seed=6)
    spec = ClassifierSpec(family, FAST[family], seed=2)
    p = fit(spec, (X, y)).predict_proba(X)
    q = fit(spec, (X, 1.0 - y)).predict_proba(X)
    assert np.max(np.abs(p + q - 1.0)) <= 0.05


@pytest.mark.parametrize("family", list(FAST))
def test_learns_and_round_trips(family, tmp_path):
    X, y = _blobs(400, 4, seed=7)
    m = fit(ClassifierSpec(family, FAST[family], seed=3), (X, y))
    p = m.predict_proba(X)
    assert p.shape == (400,) and np.all((p >= 0) & (p <= 1))
    assert np.mean((p >= 0.5) == y) > 0.8
    m.save(tmp_path / "m.json")
    back = TrainedModel.load(tmp_path / "m.json")
    assert back.predict_proba(X).tobytes() == p.tobytes()
    assert back.spec == m.spec


@pytest.mark.parametrize("family", list(FAST))
def test_fit_is_deterministic(family):
    X, y = _blobs(200, 3, seed=8)
    spec = ClassifierSpec(family, FAST[family], seed=4)
    assert fit(spec, (X, y)).predict_proba(X).tobytes() == fit(spec, (X, y)).predict_proba(X).tobytes()


def test_errors():
    X, y = _blobs(50, 3)
    with pytest.raises(ModelError, match="single class"):
        fit(ClassifierSpec("logistic_regression"), (X, np.zeros(50)))
    with pytest.raises(ModelError, match="empty"):
        fit(ClassifierSpec("decision_tree"), (np.zeros((0, 3)), np.zeros(0)))
    with pytest.raises(ModelError):
        ClassifierSpec("naive_bayes")
    with pytest.raises(ModelError):
        ClassifierSpec("mlp", {"lr": -1.0})
    with pytest.raises(ModelError):
        ClassifierSpec("decision_tree", {"depth": 3})
    m = fit(ClassifierSpec("logistic_regression", {"epochs": 2}), (X, y))
    with pytest.raises(ModelError, match="expects 3 features"):
        m.predict_proba(np.zeros((2, 4)))


def test_divergence_names_learning_rate():
    X, y = _blobs(100, 3)
    with pytest.raises(DivergenceError, match="1e\\+300"):
        fit(ClassifierSpec("mlp", {"hidden": (4,), "lr": 1e300, "epochs": 3}), (X * 1e10, y))


def test_search_samples_stay_in_space():
    rng = np.random.default_rng(0)
    for fam in FAST:
        base = ClassifierSpec(fam, FAST[fam])
        for _ in range(50):
            s = sample_spec(base, rng)
            assert within_space(s)
            if fam == "mlp":
                assert len(s.hyperparameters["hidden"]) == 2
                assert s.hyperparameters["hidden"][1] * 2 == s.hyperparameters["hidden"][0]
