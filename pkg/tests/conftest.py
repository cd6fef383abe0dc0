import pytest

from nidsguard.dataset import builtin_manifest, load_dataset
from nidsguard.features import CorrelationFit, FeatureSchema, FeatureSpec
from nidsguard.synth import write_nsl_kdd, write_unsw_nb15


@pytest.fixture(scope="session")
def nsl_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("nsl")
    return write_nsl_kdd(d, n_train=1500, n_test=500, seed=7)


@pytest.fixture(scope="session")
def unsw_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("unsw")
    return write_unsw_nb15(d, n_train=1500, n_test=500, seed=7)


@pytest.fixture(scope="session")
def nsl_split(nsl_files):
    m = builtin_manifest("nsl_kdd")
    train = load_dataset(nsl_files[0], m)
    test = load_dataset(nsl_files[1], m, vocabulary=train.categories)
    return train, test


@pytest.fixture()
def toy_schema():
    """Four features: a mutable continuous pair tied by b = 2a, a mutable count and a category."""
    feats = (
        FeatureSpec("a", "continuous", True, 0.0, 100.0, False, 100.0),
        FeatureSpec("b", "continuous", True, 0.0, 200.0, False, 200.0),
        FeatureSpec("n", "count", True, 0.0, 50.0, True, 50.0),
        FeatureSpec("proto", "categorical", False, None, None, False, 2.0),
    )
    return FeatureSchema(feats, epsilon=0.2,
                         correlation_groups=(CorrelationFit(0, 1, 2.0, 0.0, 0.0, 1.0),))



def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
