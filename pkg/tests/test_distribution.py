import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from riskshare.distribution import (
    Discrete,
    Empirical,
    Gamma,
    Lognormal,
    Uniform,
    distribution_from_spec,
    read_samples_csv,
)


def test_gamma_survival_values(gamma):
    assert gamma.survival(0.0) == 1.0
    assert gamma.survival(20.0) == pytest.approx(3 * np.exp(-2), rel=1e-12)


def test_discrete_survival_and_quantile():
    d = Discrete(np.array([0.0, 10.0]), np.array([0.5, 0.5]))
    assert d.survival(5.0) == 0.5
    assert d.quantile(0.75) == 10.0
    assert d.quantile(0.5) == 0.0


def test_uniform_quantile():
    assert Uniform(0.0, 1.0).quantile(0.25) == pytest.approx(0.25)


def test_empirical_quantile_left_inverse():
    assert Empirical(np.array([4.0, 2.0, 3.0, 1.0])).quantile(0.5) == 2.0


def test_essential_bounds(gamma):
    lo, hi = gamma.essential_bounds()
    assert lo == 0.0
    assert hi == pytest.approx(stats.gamma(2, scale=10).isf(1e-9), rel=1e-9)
    assert Uniform(-1.0, 3.0).essential_bounds() == (-1.0, 3.0)
    assert Empirical(np.array([5.0, 7.0, 7.0, 9.0])).essential_bounds() == (5.0, 9.0)


def test_truncation_is_configurable():
    a = Gamma(2.0, 10.0, truncation_mass=1e-6).span
    b = Gamma(2.0, 10.0, truncation_mass=1e-12).span
    assert a < b
    assert Gamma(2.0, 10.0).survival(1e6) == 0.0


@pytest.mark.parametrize("dist", [Gamma(2.0, 10.0), Gamma(0.7, 3.0), Lognormal(1.0, 0.6),
                                  Uniform(-2.0, 5.0)])
def test_quantile_round_trip(dist):
    p = np.linspace(0.001, 0.999, 199)
    np.testing.assert_allclose(dist.survival(dist.quantile(p)), 1 - p, atol=1e-8)


def test_gamma_matches_scipy(gamma):
    ref = stats.gamma(2, scale=10)
    x = np.linspace(0.1, 200, 300)
    np.testing.assert_allclose(gamma.survival(x), ref.sf(x), rtol=1e-10, atol=1e-15)
    np.testing.assert_allclose(gamma.pdf(x), ref.pdf(x), rtol=1e-10, atol=1e-15)
    p = np.array([1e-6, 0.3, 0.5, 0.9, 1 - 1e-6])
    np.testing.assert_allclose(gamma.quantile(p), ref.ppf(p), rtol=1e-9)


def test_gamma_mean_from_survival(gamma):
    # scipy's QUADPACK here, independent of the package integrator
    lo, hi = gamma.essential_bounds()
    mean, _ = integrate.quad(gamma.survival, lo, hi, limit=200, epsabs=1e-12, epsrel=1e-12)
    assert mean == pytest.approx(20.0, rel=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=30), st.integers(-25, 25))
def test_empirical_survival_counts(samples, x):
    e = Empirical(np.array(samples, dtype=float))
    expected = sum(s > x for s in samples) / len(samples)
    assert e.survival(float(x)) == expected


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=12, unique=True),
       st.floats(1e-9, 1.0, exclude_max=True))
def test_discrete_quantile_is_left_inverse(atoms, p):
    atoms = np.sort(np.array(atoms, dtype=float))
    probs = np.full(atoms.size, 1.0 / atoms.size)
    d = Discrete(atoms, probs)
    q = d.quantile(p)
    assert d.cdf(q) >= p - 1e-12
    smaller = atoms[atoms < q]
    if smaller.size:
        assert d.cdf(smaller[-1]) < p + 1e-12


def test_discrete_validation():
    with pytest.raises(ValueError):
        Discrete(np.array([0.0, 1.0]), np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        Discrete(np.array([0.0, 1.0]), np.array([-0.5, 1.5]))


def test_gap_survivals():
    d = Discrete(np.array([0.0, 1.0, 3.0]), np.array([0.2, 0.3, 0.5]))
    widths, tails = d.gap_survivals()
    np.testing.assert_allclose(widths, [1.0, 2.0])
    np.testing.assert_allclose(tails, [0.8, 0.5])


def test_specs_and_csv(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("1\n2\n3\n4\n", encoding="utf-8")
    e = distribution_from_spec({"type": "empirical", "path": "s.csv"}, base_dir=tmp_path)
    assert e.quantile(0.5) == 2.0
    g = distribution_from_spec({"type": "gamma", "shape": 2, "scale": 10})
    assert g.survival(20.0) == pytest.approx(3 * np.exp(-2))
    joint = tmp_path / "j.csv"
    joint.write_text("a,b\n1,2\n3,4\n", encoding="utf-8")
    np.testing.assert_array_equal(read_samples_csv(joint, "b"), [2.0, 4.0])
    with pytest.raises(ValueError):
        distribution_from_spec({"type": "pareto"})
