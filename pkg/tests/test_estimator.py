import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import example_sets
from riskshare import ComonotoneRiskSharing, Gamma
from riskshare.choquet import coherent_risk
from riskshare.distribution import Empirical

ES = [{"type": "es", "alpha": 0.1}]
WANG = [{"type": "wang", "shift": 0.6}]


def test_params_and_clone():
    est = ComonotoneRiskSharing(distortion_sets=[ES, WANG], tie_rule="lowest", gap_tol=1e-7)
    params = est.get_params()
    assert params["tie_rule"] == "lowest" and params["gap_tol"] == 1e-7
    twin = clone(est)
    assert twin.get_params() == params and twin is not est


def test_unfitted():
    with pytest.raises(NotFittedError):
        ComonotoneRiskSharing(distortion_sets=[ES]).transform(np.ones(3))


def test_needs_agents_and_data():
    with pytest.raises(ValueError):
        ComonotoneRiskSharing().fit(np.ones(3))
    with pytest.raises(ValueError):
        ComonotoneRiskSharing(distortion_sets=[ES]).fit()


def test_fit_on_aggregate_samples():
    rng = np.random.default_rng(0)
    s = rng.gamma(2.0, 10.0, size=200)
    est = ComonotoneRiskSharing(distortion_sets=[ES, WANG])
    y = est.fit_transform(s)
    assert y.shape == (200, 2)
    np.testing.assert_allclose(y.sum(axis=1), s, atol=1e-9 * s.max())
    # comonotone: each column is non-decreasing in s
    order = np.argsort(s)
    assert np.all(np.diff(y[order], axis=0) >= -1e-9)
    assert est.converged_ and est.verification_.passed
    assert list(est.get_feature_names_out()) == ["agent_1", "agent_2"]
    np.testing.assert_allclose(est.posterior_risks_.sum(), est.value_, rtol=1e-5)


def test_fit_on_agent_columns():
    rng = np.random.default_rng(1)
    X = rng.gamma(2.0, 5.0, size=(150, 2))
    est = ComonotoneRiskSharing(distortion_sets=[ES, WANG]).fit(X)
    sets = [est.result_.problem.sets[i] for i in range(2)]
    want = [coherent_risk(Empirical(X[:, i]), sets[i])[0] for i in range(2)]
    np.testing.assert_allclose(est.initial_risks_, want, rtol=1e-12)
    assert np.all(est.posterior_risks_ <= est.initial_risks_ + 1e-9)
    y = est.transform(X)
    np.testing.assert_allclose(y.sum(axis=1), X.sum(axis=1), atol=1e-9)
    with pytest.raises(ValueError):
        est.transform(np.ones((3, 5)))


def test_distribution_argument():
    est = ComonotoneRiskSharing(distortion_sets=list(example_sets()), distribution=Gamma(2.0, 10.0))
    est.fit()
    assert est.weights_[2][0] == pytest.approx(0.2269, abs=5e-3)
    spec = ComonotoneRiskSharing(distortion_sets=[ES, WANG],
                                 distribution={"type": "uniform", "lo": 0, "hi": 1}).fit()
    assert spec.value_ > 0
