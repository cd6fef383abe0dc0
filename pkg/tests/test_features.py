import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from nidsguard.dataset import LabeledDataset
from nidsguard.features import (CorrelationFit, EngineeringSpec, FeatureSchema, FeatureSpec,
                                SchemaError, builtin_schema, compute_correlation_groups,
                                engineer_features, fit_preprocessor, project_to_valid, transform)


def _schema(specs, **kw):
    return FeatureSchema(tuple(specs), **kw)


def test_minmax_example():
    ds = make_dataset([[0.0], [5.0], [10.0]], [0, 1, 0], names=("x",))
    st_ = fit_preprocessor(ds, _schema([FeatureSpec("x", "continuous")]))
    assert st_.mins == (0.0,) and st_.maxs == (10.0,)
    assert transform(ds, st_).features[:, 0].tolist() == [0.0, 0.5, 1.0]


def test_onehot_with_unseen_bucket():
    cats = {"proto": ("tcp", "udp", "icmp", "sctp")}
    train = LabeledDataset(np.array([[0.0], [1.0], [2.0]]), np.array([0, 1, 0]), "t", ("proto",),
                           None, cats)
    st_ = fit_preprocessor(train, _schema([FeatureSpec("proto", "categorical")]))
    assert st_.output_names == ("proto=tcp", "proto=udp", "proto=icmp", "proto=<unseen>")
    test = LabeledDataset(np.array([[1.0], [3.0]]), np.array([0, 0]), "t", ("proto",), None, cats)
    out = transform(test, st_).features
    assert out.tolist() == [[0, 1, 0, 0], [0, 0, 0, 1]]


def test_constant_feature_warns_and_scales_to_zero():
    ds = make_dataset([[3.0, 1.0], [3.0, 2.0]], [0, 1], names=("c", "x"))
    schema = _schema([FeatureSpec("c", "count"), FeatureSpec("x", "continuous")])
    st_ = fit_preprocessor(ds, schema)
    assert any("constant" in w for w in st_.warnings)
    assert transform(ds, st_).features[:, 0].tolist() == [0.0, 0.0]


def test_transform_dimension_mismatch():
    ds = make_dataset([[0.0], [1.0]], [0, 1], names=("x",))
    st_ = fit_preprocessor(ds, _schema([FeatureSpec("x", "continuous")]))
    with pytest.raises(SchemaError):
        transform(make_dataset([[0.0, 1.0]], [0]), st_)


def test_fit_transform_in_unit_interval(nsl_split):
    train, test = nsl_split
    schema = compute_correlation_groups(train, builtin_schema("nsl_kdd", train))
    st_ = fit_preprocessor(train, schema, engineer=True, correlation_residuals=True)
    out = transform(train, st_).features
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert np.all(np.isfinite(transform(test, st_).features))


def _eng_schema():
    specs = [FeatureSpec("proto", "categorical"), FeatureSpec("src_bytes", "count", True, 0, 1e6,
                                                              True, 1e6),
             FeatureSpec("dst_bytes", "count", True, 0, 1e6, True, 1e6)]
    eng = EngineeringSpec(log1p=("src_bytes",), ratios=(("src_bytes", "dst_bytes"),),
                          group_by="proto", group_zscore=("src_bytes",))
    return _schema(specs, engineering=eng)


def test_engineering_examples():
    schema = _eng_schema()
    X = [[0, 100.0, 0.0], [0, 0.0, 5.0], [1, 7.0, 1.0], [1, 7.0, 3.0]]
    ds = make_dataset(X, [0, 1, 0, 1], names=schema.names)
    out = engineer_features(ds, schema)
    names = out.feature_names[3:]
    assert names == ("log1p_src_bytes", "ratio_src_bytes_dst_bytes", "groupz_src_bytes_by_proto")
    E = out.features[:, 3:]
    assert E[0, 1] == 100.0  # 100 / (0 + 1)
    assert E[1, 0] == 0.0  # log1p(0)
    # both proto=1 rows equal their group mean -> z-score 0
    assert E[2, 2] == 0.0 and E[3, 2] == 0.0
    # original columns unchanged bitwise
    assert out.features[:, :3].tobytes() == ds.features.tobytes()


def test_correlation_perfect_pair():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 10, 200)
    X = np.column_stack([a, 2 * a])
    schema = _schema([FeatureSpec("a", "continuous", True, 0, 10, False, 10),
                      FeatureSpec("b", "continuous", True, 0, 20, False, 20)])
    fits = compute_correlation_groups(make_dataset(X, [0, 1] * 100, names=("a", "b")),
                                      schema).correlation_groups
    assert len(fits) == 1
    g = fits[0]
    assert (g.anchor, g.dependent) == (0, 1)
    assert g.slope == pytest.approx(2.0, abs=1e-12)
    assert g.intercept == pytest.approx(0.0, abs=1e-10)
    assert g.sigma == pytest.approx(0.0, abs=1e-10)


def test_correlation_independent_uniforms_not_paired():
    # oracle: for n=1000 independent uniforms |r| is ~N(0, 1/sqrt(n)), far below 0.7
    rng = np.random.default_rng(12)
    X = rng.uniform(size=(1000, 3))
    r = np.corrcoef(X.T)[np.triu_indices(3, 1)]
    assert np.all(np.abs(r) < 0.1)
    schema = _schema([FeatureSpec(f"u{i}", "continuous", True, 0, 1, False, 1) for i in range(3)])
    ds = make_dataset(X, [0, 1] * 500, names=schema.names)
    assert compute_correlation_groups(ds, schema, 0.7).correlation_groups == ()


def test_correlation_constant_excluded():
    X = np.column_stack([np.arange(10.0), np.full(10, 4.0)])
    schema = _schema([FeatureSpec("a", "continuous", True, 0, 9, False, 9),
                      FeatureSpec("c", "continuous", True, 4, 4, False, 0)])
    ds = make_dataset(X, [0, 1] * 5, names=("a", "c"))
    assert compute_correlation_groups(ds, schema, 0.5).correlation_groups == ()


def test_correlation_pairs_form_star_forest(unsw_files):
    from nidsguard.dataset import builtin_manifest, load_dataset

    train = load_dataset(unsw_files[0], builtin_manifest("unsw_nb15"))
    fits = compute_correlation_groups(train, builtin_schema("unsw_nb15", train), 0.3).correlation_groups
    deps = [g.dependent for g in fits]
    assert len(deps) == len(set(deps))
    assert not set(deps) & {g.anchor for g in fits}


def test_schema_invariants():
    with pytest.raises(SchemaError):
        FeatureSpec("proto", "categorical", mutable=True)
    with pytest.raises(SchemaError):
        _schema([FeatureSpec("a", "continuous", True, 0.0, None, False, 1.0)])
    with pytest.raises(SchemaError):
        _schema([FeatureSpec("a", "continuous")],
                correlation_groups=(CorrelationFit(0, 3, 1, 0, 0, 1),))


# ---------------------------------------------------------------------------
# projection


def test_projection_identity(toy_schema):
    x = np.array([10.0, 20.0, 7.0, 1.0])
    assert np.array_equal(project_to_valid(x, x, toy_schema), x)


def test_projection_restores_categorical(toy_schema):
    x = np.array([10.0, 20.0, 7.0, 1.0])
    v = x.copy()
    v[3] = 0.0
    assert project_to_valid(v, x, toy_schema)[3] == 1.0


def test_projection_zero_residual_pair(toy_schema):
    x = np.array([10.0, 20.0, 7.0, 1.0])
    v = x.copy()
    v[0] = 13.5
    out = project_to_valid(v, x, toy_schema)
    assert out[0] == 13.5
    assert out[1] == 27.0


def test_projection_integral_moves_whole_steps(toy_schema):
    x = np.array([10.0, 20.0, 7.0, 1.0])
    v = x.copy()
    v[2] = 9.4
    assert project_to_valid(v, x, toy_schema)[2] == 9.0
    v[2] = 100.0  # clipped to the budget: 7 + 0.2 * 50 = 17
    assert project_to_valid(v, x, toy_schema)[2] == 17.0


_vec = st.lists(st.floats(-500, 500, allow_nan=False), min_size=4, max_size=4)


@settings(max_examples=300, deadline=None)
@given(_vec, st.floats(0, 100), st.floats(0, 200), st.integers(0, 50), st.sampled_from([0.0, 1.0]),
       st.floats(0, 5))
def test_projection_properties(v, a, b, n, proto, sigma):
    feats = (
        FeatureSpec("a", "continuous", True, 0.0, 100.0, False, 100.0),
        FeatureSpec("b", "continuous", True, 0.0, 200.0, False, 200.0),
        FeatureSpec("n", "count", True, 0.0, 50.0, True, 50.0),
        FeatureSpec("proto", "categorical", False, None, None, False, 2.0),
    )
    schema = FeatureSchema(feats, correlation_groups=(CorrelationFit(0, 1, 1.7, 3.0, sigma, 0.9),))
    x = np.array([a, b, float(n), proto])
    p1 = project_to_valid(np.array(v), x, schema)
    p2 = project_to_valid(p1, x, schema)
    assert np.array_equal(p1, p2)
    budget = schema.budgets()
    assert np.all(np.abs(p1 - x) <= budget + 1e-9)
    assert p1[3] == x[3]
    assert float(p1[2] - x[2]).is_integer()
    assert np.array_equal(project_to_valid(x, x, schema), x)
