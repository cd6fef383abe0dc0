import numpy as np
import pytest

from nidsguard.ensemble import (DL_HIDDEN, TC_FAMILIES, Detector, Ensemble, EnsembleError,
                                build_ensemble, classify, ensemble_proba, member_specs)
from nidsguard.features import builtin_schema, fit_preprocessor
from nidsguard.models import ClassifierSpec, fit


def _data(seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(200) < 0.5).astype(float)
    return rng.normal(0, 1, (200, 3)) + y[:, None], y


def _small_tc(X, y):
    over = {"logistic_regression": {"epochs": 20}, "linear_svm": {"epochs": 20},
            "random_forest": {"n_estimators": 5}}
    return build_ensemble(member_specs("tc", over, seed=1), X, y, "tc")


def test_soft_vote_is_member_mean():
    X, y = _data()
    e = _small_tc(X, y)
    expect = np.mean([m.predict_proba(X) for m in e.members], axis=0)
    assert np.array_equal(ensemble_proba(e, X), expect)
    assert np.array_equal(classify(e, X), (expect >= 0.5).astype(np.int8))


def test_threshold_boundary_counts_as_attack():
    X, y = _data()
    m = fit(ClassifierSpec("decision_tree", {"max_depth": 1}), (X, y))
    p = m.predict_proba(X)
    e = Ensemble((m,), threshold=float(p[0]))
    assert classify(e, X[:1])[0] == 1


def test_member_specs():
    tc = member_specs("tc", seed=10)
    assert [s.family for s in tc] == list(TC_FAMILIES)
    assert [s.seed for s in tc] == [10, 11, 12, 13]
    dl = member_specs("dl", {"mlp_1": {"lr": 0.002}})
    assert [s.hyperparameters["hidden"] for s in dl] == list(DL_HIDDEN)
    assert dl[1].hyperparameters["lr"] == 0.002
    with pytest.raises(EnsembleError):
        member_specs("svm")


def test_save_load_round_trip(tmp_path):
    X, y = _data(1)
    e = _small_tc(X, y)
    e.save(tmp_path / "tc")
    back = Ensemble.load(tmp_path / "tc")
    assert ensemble_proba(back, X).tobytes() == ensemble_proba(e, X).tobytes()
    assert back.name == "tc" and back.threshold == 0.5


def test_validation():
    X, y = _data()
    a = fit(ClassifierSpec("decision_tree"), (X, y))
    b = fit(ClassifierSpec("decision_tree"), (X[:, :2], y))
    with pytest.raises(EnsembleError):
        Ensemble(())
    with pytest.raises(EnsembleError):
        Ensemble((a, b))
    with pytest.raises(EnsembleError):
        Ensemble((a,), threshold=1.0)
    with pytest.raises(EnsembleError):
        ensemble_proba(Ensemble((a,)), np.zeros((1, 5)))


def test_detector_encodes_raw_vectors(nsl_split):
    train, _ = nsl_split
    schema = builtin_schema("nsl_kdd", train)
    prep = fit_preprocessor(train, schema)
    Z = prep.transform_matrix(train.features)
    m = fit(ClassifierSpec("decision_tree", {"max_depth": 4}), (Z, train.labels))
    det = Detector(Ensemble((m,)), prep)
    assert np.array_equal(det.ensemble_proba(train.features[:50]), m.predict_proba(Z[:50]))
    assert det.classify(train.features[0]).shape == (1,)
