import numpy as np
import pytest

from riskshare.distortion import DistortionSet, ExpectedShortfall, PowerTail, WangTransform
from riskshare.distribution import Gamma
from riskshare.pipeline import solve_market
from riskshare.solver import MinMaxProblem, solve

T_HAT = ExpectedShortfall(0.025)
T_HAT_1 = ExpectedShortfall(0.01)
T_HAT_2 = PowerTail(0.05, 0.3)
T_HAT_3 = WangTransform(2.8)


def example_sets():
    return (
        DistortionSet((T_HAT_1,), label="agent 1"),
        DistortionSet((T_HAT, T_HAT_2), label="agent 2"),
        DistortionSet((T_HAT, T_HAT_3), label="agent 3"),
    )


@pytest.fixture(scope="session")
def gamma():
    return Gamma(2.0, 10.0)


@pytest.fixture(scope="session")
def example_problem(gamma):
    return MinMaxProblem(gamma, example_sets())


@pytest.fixture(scope="session")
def example_solution(example_problem):
    return solve(example_problem)


@pytest.fixture(scope="session")
def example_market(gamma):
    return solve_market(gamma, example_sets(), initial_shares=np.full(3, 1 / 3))
