"""scikit-learn style facade over the market pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .choquet import coherent_risk
from .distortion import DistortionSet, distortion_set_from_specs
from .distribution import Empirical, RiskDistribution, distribution_from_spec
from .quadrature import QuadratureConfig
from .pipeline import solve_market
from .solver import SolverOptions


def _as_set(spec, i: int) -> DistortionSet:
    if isinstance(spec, DistortionSet):
        return spec
    return distortion_set_from_specs(list(spec), label=f"agent {i + 1}")


class ComonotoneRiskSharing(TransformerMixin, BaseEstimator):
    """Comonotone Pareto-optimal allocation of an aggregate risk.

    ``fit`` solves the market; ``transform`` maps realized aggregate losses to
    each agent's allocated loss ``g_i(s - s_lower) + c_i``.

    Parameters
    ----------
    distortion_sets : list
        One entry per agent: a :class:`DistortionSet` or a list of distortion
        records such as ``[{"type": "es", "alpha": 0.025}]``.
    distribution : RiskDistribution or dict, optional
        Law of the aggregate risk. If omitted, ``fit`` uses the empirical law
        of ``X``.
    initial_shares : array-like, optional
        ``theta`` with ``X_i = theta_i S``; equal shares by default. Ignored
        when ``X`` holds one column per agent.
    initial_risks : array-like, optional
        Precomputed ``rho_i(X_i)``; takes precedence over everything else.
    tie_rule : {"equal", "lowest"}
        Split of layers shared by several agents.
    gap_tol, max_iters : solver settings.
    abs_tol, rel_tol : quadrature settings.
    verify_tol : float
        Relative optimality residual accepted by the verification step.

    Attributes
    ----------
    weights_ : list of ndarray
        Optimal mixing weights per agent.
    optimal_distortions_ : list
    value_ : float
        Optimal total risk ``sum_i rho_i(Y_i)``.
    layers_ : LayerStructure
    profile_ : RetentionProfile
    side_payments_ : ndarray
    initial_risks_, posterior_risks_ : ndarray
    verification_ : VerificationReport
    """

    def __init__(self, distortion_sets=(), distribution=None, initial_shares=None,
                 initial_risks=None, tie_rule="equal", gap_tol=1e-6, max_iters=500,
                 abs_tol=None, rel_tol=1e-8, verify_tol=1e-5):
        self.distortion_sets = distortion_sets
        self.distribution = distribution
        self.initial_shares = initial_shares
        self.initial_risks = initial_risks
        self.tie_rule = tie_rule
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.verify_tol = verify_tol

    def fit(self, X=None, y=None):
        """Solve the market.

        ``X`` is either a vector of aggregate loss samples or a matrix with
        one column per agent (individual loss samples, summed row-wise to get
        the aggregate). It may be omitted when ``distribution`` is given.
        """
        sets = [_as_set(s, i) for i, s in enumerate(self.distortion_sets)]
        if not sets:
            raise ValueError("distortion_sets must list at least one agent")
        n = len(sets)
        quad = QuadratureConfig(abs_tol=self.abs_tol, rel_tol=self.rel_tol)
        initial = None if self.initial_risks is None else np.asarray(self.initial_risks, float)

        if self.distribution is not None:
            dist = self.distribution
            if not isinstance(dist, RiskDistribution):
                dist = distribution_from_spec(dist)
        elif X is None:
            raise ValueError("fit needs samples X or a distribution")
        else:
            X = check_array(X, ensure_2d=False, dtype=float)
            if X.ndim == 2 and X.shape[1] > 1:
                if X.shape[1] != n:
                    raise ValueError(f"X has {X.shape[1]} columns for {n} agents")
                dist = Empirical(X.sum(axis=1))
                if initial is None:
                    initial = np.array([coherent_risk(Empirical(X[:, i]), s, quad)[0]
                                        for i, s in enumerate(sets)])
            else:
                dist = Empirical(X.ravel())

        result = solve_market(
            dist, sets, initial_risks=initial, initial_shares=self.initial_shares,
            tie_rule=self.tie_rule,
            solver_options=SolverOptions(gap_tol=self.gap_tol, max_iters=self.max_iters),
            quad=quad, verify_tol=self.verify_tol,
        )
        self.distribution_ = dist
        self.result_ = result
        self.weights_ = result.solution.weights
        self.optimal_distortions_ = result.solution.optimal_distortions
        self.value_ = result.solution.value + result.problem.lower_bound_s
        self.converged_ = result.solution.converged
        self.layers_ = result.layers
        self.profile_ = result.profile
        self.side_payments_ = result.side_payments
        self.initial_risks_ = result.initial_risks
        self.posterior_risks_ = result.posterior_risks
        self.verification_ = result.verification
        self.n_agents_ = n
        return self

    def transform(self, X):
        """Allocated losses, shape ``(n_samples, n_agents)``.

        ``X`` holds aggregate losses, or one column per agent whose row sums
        are the aggregate losses.
        """
        check_is_fitted(self, "profile_")
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2 and X.shape[1] > 1:
            if X.shape[1] != self.n_agents_:
                raise ValueError(f"X has {X.shape[1]} columns for {self.n_agents_} agents")
            s = X.sum(axis=1)
        else:
            s = X.ravel()
        return self.profile_.allocate(s)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "profile_")
        return np.array([f"agent_{i + 1}" for i in range(self.n_agents_)], dtype=object)
