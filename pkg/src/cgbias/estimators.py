"""Estimator-style wrappers with scikit-learn's ``get_params``/``set_params``.

Each estimator is configured by keyword arguments, learns from an
:class:`Instance` (or cost pairs) in ``fit`` and exposes its results as
attributes with a trailing underscore.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .costfun import Identity
from .flowsolve import (
    AgentType,
    Instance,
    SolverConfig,
    per_type_cost,
    social_cost,
    solve_equilibrium_multitype,
    solve_social_optimum,
)
from .smoothbounds import fit_biased_smoothness, fit_mu_hat, measured_bpoa

__all__ = ["BiasedEquilibrium", "SocialOptimum", "BPoAEstimator", "SmoothnessFitter"]


class _SolverParams(BaseEstimator):
    def __init__(self, tolerance=1e-8, max_iters=5000, restarts=1, seed=0, method="auto"):
        self.tolerance = tolerance
        self.max_iters = max_iters
        self.restarts = restarts
        self.seed = seed
        self.method = method

    def _config(self) -> SolverConfig:
        return SolverConfig(self.tolerance, self.max_iters, restarts=self.restarts, seed=self.seed, method=self.method)


class BiasedEquilibrium(_SolverParams):
    """Wardrop equilibrium of the biased game (or of the true game with ``biased=False``)."""

    def __init__(self, biased=True, tolerance=1e-8, max_iters=5000, restarts=1, seed=0, method="auto"):
        super().__init__(tolerance, max_iters, restarts, seed, method)
        self.biased = biased

    def fit(self, instance: Instance, y=None):
        if not self.biased:
            instance = instance.with_types(
                [AgentType(t.source, t.target, t.mass, Identity(), t.name) for t in instance.types]
            )
        self.flow_, self.certificate_ = solve_equilibrium_multitype(instance, self._config())
        self.social_cost_ = social_cost(instance, self.flow_)
        self.per_type_cost_ = [per_type_cost(instance, self.flow_, i) for i in range(len(instance.types))]
        return self

    def loads(self):
        check_is_fitted(self, "flow_")
        return self.flow_.as_dict()


class SocialOptimum(_SolverParams):
    def fit(self, instance: Instance, y=None):
        self.flow_, self.social_cost_ = solve_social_optimum(instance, self._config())
        return self


class BPoAEstimator(_SolverParams):
    """Measured biased price of anarchy of one instance."""

    def fit(self, instance: Instance, y=None):
        rep = measured_bpoa(instance, self._config())
        self.bpoa_ = rep.measured_bpoa
        self.equilibrium_cost_ = rep.equilibrium_cost
        self.optimum_cost_ = rep.optimum_cost
        return self


class SmoothnessFitter(BaseEstimator):
    """Numerical (lam_hat, mu_hat) for a set of ``(c, chat)`` pairs.

    With ``lam`` fixed the smallest valid mu is fitted; with ``lam=None`` the
    pair minimising ``lam / (1 - mu)`` over a lam grid is returned.
    """

    def __init__(self, lam: Optional[float] = 1.0, domain: Tuple[float, float] = (0.0, 10.0), grid: int = 201):
        self.lam = lam
        self.domain = domain
        self.grid = grid

    def fit(self, pairs: Sequence, y=None):
        pairs = list(pairs)
        if not pairs:
            raise ValueError("need at least one (c, chat) pair")
        if self.lam is None:
            p = fit_biased_smoothness(pairs, domain=self.domain, grid=self.grid)
        else:
            fits = [fit_mu_hat(c, bc, self.lam, self.domain, self.grid) for c, bc in pairs]
            p = max(fits, key=lambda q: q.mu)
        self.params_ = p
        self.lam_, self.mu_ = p.lam, p.mu
        self.bound_ = p.bound
        return self
