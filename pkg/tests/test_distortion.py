import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskshare.distortion import (
    DistortionSet,
    DomainError,
    ExpectedShortfall,
    Identity,
    Mixture,
    PiecewiseLinear,
    PowerTail,
    WangTransform,
    concavity_check,
    distortion_from_spec,
    evaluate,
    mix,
)

from conftest import T_HAT, T_HAT_1, T_HAT_2, T_HAT_3

GRID = np.linspace(0.0, 1.0, 2001)

alphas = st.floats(0.01, 1.0)
shifts = st.floats(0.0, 3.0)
exponents = st.floats(0.05, 1.0)


@st.composite
def distortions(draw):
    kind = draw(st.sampled_from(["es", "power", "wang", "identity"]))
    if kind == "es":
        return ExpectedShortfall(draw(alphas))
    if kind == "power":
        return PowerTail(draw(alphas), draw(exponents))
    if kind == "wang":
        return WangTransform(draw(shifts))
    return Identity()


def test_es_value():
    assert evaluate(ExpectedShortfall(0.025), 0.0125) == pytest.approx(0.5, abs=1e-15)


def test_identity_value():
    assert evaluate(Identity(), 0.37) == 0.37


def test_wang_endpoints():
    assert evaluate(T_HAT_3, 0.0) == 0.0
    assert evaluate(T_HAT_3, 1.0) == 1.0


def test_mix_two_es_by_hand():
    T = mix(DistortionSet((T_HAT, T_HAT_1)), [0.5, 0.5])
    assert T(0.005) == pytest.approx(0.5 * 0.005 / 0.025 + 0.5 * 0.005 / 0.01, abs=1e-15)
    assert T(0.005) == pytest.approx(0.35, abs=1e-15)


def test_mix_example_solution_is_pointwise_combination():
    T = mix(DistortionSet((T_HAT, T_HAT_3)), [0.2269, 0.7731])
    assert isinstance(T, Mixture)
    np.testing.assert_allclose(T(GRID), 0.2269 * T_HAT(GRID) + 0.7731 * T_HAT_3(GRID), atol=1e-15)


def test_mix_single_generator_returns_it():
    dset = DistortionSet((T_HAT_2,))
    assert mix(dset, [1.0]) is T_HAT_2


@pytest.mark.parametrize("weights", [[0.5, 0.6], [-0.1, 1.1], [1.0]])
def test_mix_rejects_off_simplex(weights):
    with pytest.raises(ValueError):
        mix(DistortionSet((T_HAT, T_HAT_1)), weights)


def test_concavity_known_cases():
    assert concavity_check(ExpectedShortfall(0.025))
    assert not concavity_check(PiecewiseLinear((0, 0.5, 1), (0, 0.1, 1)))
    assert concavity_check(T_HAT_3)
    assert concavity_check(T_HAT_2)


def test_nonconcave_generator_rejected():
    with pytest.raises(ValueError, match="not concave"):
        DistortionSet((PiecewiseLinear((0, 0.5, 1), (0, 0.1, 1)),))


def test_domain_error():
    with pytest.raises(DomainError):
        evaluate(T_HAT, 1.5)
    with pytest.raises(DomainError):
        evaluate(T_HAT, -0.01)


@pytest.mark.parametrize("T", [T_HAT, T_HAT_2, T_HAT_3, Identity(),
                               PiecewiseLinear((0, 0.2, 1), (0, 0.6, 1))])
def test_complement_matches_definition(T):
    u = np.linspace(0.0, 1.0, 501)
    np.testing.assert_allclose(T.complement(u), 1.0 - T(1.0 - u), atol=1e-12)


def test_wang_complement_resolves_tail():
    # 1 - T(1 - u) rounds to 0 in double precision; the complement does not
    u = 1e-20
    assert 1.0 - T_HAT_3(1.0 - u) == 0.0
    assert T_HAT_3.complement(u) > 0.0


@pytest.mark.parametrize("spec,expected", [
    ({"type": "es", "alpha": 0.025}, T_HAT),
    ({"type": "power", "alpha": 0.05, "exponent": 0.3}, T_HAT_2),
    ({"type": "wang", "shift": 2.8}, T_HAT_3),
    ({"type": "identity"}, Identity()),
])
def test_spec_round_trip(spec, expected):
    T = distortion_from_spec(spec)
    assert T == expected
    assert distortion_from_spec(T.to_spec()) == T


def test_spec_unknown_type():
    with pytest.raises(ValueError):
        distortion_from_spec({"type": "cubic"})


@settings(max_examples=60, deadline=None)
@given(st.lists(distortions(), min_size=1, max_size=4), st.data())
def test_mix_is_linear_and_concave(gens, data):
    raw = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(gens), max_size=len(gens))))
    if raw.sum() <= 0:
        raw = np.ones(len(gens))
    w = raw / raw.sum()
    w[-1] = 1.0 - w[:-1].sum()
    w = np.clip(w, 0, None)
    w = w / w.sum()
    dset = DistortionSet(tuple(gens), check_concavity=False)
    T = mix(dset, w)
    expected = sum(wk * g(GRID) for wk, g in zip(w, gens))
    np.testing.assert_allclose(T(GRID), expected, atol=1e-12)
    assert concavity_check(T)


@settings(max_examples=60, deadline=None)
@given(distortions(), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=50))
def test_non_decreasing(T, ts):
    t = np.sort(np.array(ts))
    assert np.all(np.diff(T(t)) >= -1e-15)
    assert T(0.0) == 0.0 and T(1.0) == 1.0
