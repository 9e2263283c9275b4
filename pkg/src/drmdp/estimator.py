"""Estimator-style wrappers around the functional solvers.

Hyperparameters go to the constructor, ``fit`` takes the problem data and
stores results in trailing-underscore attributes, and ``predict`` maps
``(stage, state)`` pairs to action distributions. Each ``fit`` also accepts a
:class:`~drmdp.instance_file.ProblemFile` in place of its separate arguments.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .cost import diagnose_cost
from .instance_file import ProblemFile
from .risk import AvarSpec, build_avar_ambiguity, solve_nested_risk
from .robust import diagnose
from .static import OracleConfig, check_equivalence, enlargement_invariance, history_dependent_check


class _PolicyMixin:
    """Shared ``predict``/``value`` plumbing; subclasses set ``instance_``, ``policy_`` and ``values_``."""

    def _require_fit(self):
        if not hasattr(self, "policy_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def _index(self, t, state):
        return self.instance_.state_index(t, state) if isinstance(state, str) else int(state)

    def predict(self, queries):
        """Action distributions for an iterable of ``(stage, state)`` pairs (stage from 0)."""
        self._require_fit()
        return [np.array(self.policy_[t][self._index(t, s)]) for t, s in queries]

    def value(self, t=0, state=None):
        self._require_fit()
        s = self.instance_.initial_state if state is None else self._index(t, state)
        return float(self.values_[t][s])


class RobustMDPSolver(_PolicyMixin, BaseEstimator):
    """Game formulation solved by backward recursion with per-state matrix games."""

    def fit(self, instance, model=None):
        if isinstance(instance, ProblemFile):
            instance, model = instance.instance, instance.ambiguity
        if model is None:
            raise ValueError("an ambiguity model is required")
        self.instance_ = instance
        self.report_ = diagnose(instance, model)
        self.values_ = self.report_.primal_values
        self.dual_values_ = self.report_.dual_values
        self.policy_ = self.report_.controller_policy
        self.deterministic_policy_ = self.report_.deterministic_policy
        self.gap_ = self.report_.gap
        return self


class CostRobustSolver(_PolicyMixin, BaseEstimator):
    """Known kernel, ambiguous stage costs."""

    def fit(self, instance, kernel=None, cost_model=None):
        if isinstance(instance, ProblemFile):
            instance, kernel, cost_model = instance.instance, instance.kernel, instance.cost_ambiguity
        if kernel is None or cost_model is None:
            raise ValueError("a nominal kernel and a cost model are required")
        self.instance_ = instance
        self.report_ = diagnose_cost(instance, kernel, cost_model)
        self.values_ = self.report_.primal_values
        self.dual_values_ = self.report_.dual_values
        self.regularized_values_ = self.report_.regularized_values
        self.policy_ = self.report_.policy
        self.gap_ = self.report_.gap
        return self


class NestedRiskSolver(_PolicyMixin, BaseEstimator):
    """Nested AV@R recursion with risk level ``alpha``.

    ``alpha=None`` takes the level from a problem file.
    """

    def __init__(self, alpha=None):
        self.alpha = alpha

    def fit(self, instance, reference_kernel=None):
        alpha = self.alpha
        if isinstance(instance, ProblemFile):
            if instance.avar is None:
                raise ValueError("problem file has no risk section")
            reference_kernel = instance.avar.reference_kernel
            alpha = instance.avar.alpha if alpha is None else alpha
            instance = instance.instance
        if reference_kernel is None or alpha is None:
            raise ValueError("a reference kernel and a risk level are required")
        spec = AvarSpec(alpha, reference_kernel)
        self.instance_ = instance
        self.spec_ = spec
        self.values_, self.policy_ = solve_nested_risk(instance, spec)
        self.ambiguity_ = build_avar_ambiguity(spec, instance)
        return self


class StaticOracle(BaseEstimator):
    """Brute-force static and history-dependent oracles compared with the game recursion."""

    def __init__(self, policy_grid_resolution=20, kernel_grid_resolution=12, max_enumeration=50_000_000,
                 history=False):
        self.policy_grid_resolution = policy_grid_resolution
        self.kernel_grid_resolution = kernel_grid_resolution
        self.max_enumeration = max_enumeration
        self.history = history

    def config(self):
        return OracleConfig(self.policy_grid_resolution, self.kernel_grid_resolution, self.max_enumeration)

    def fit(self, instance, model=None):
        if isinstance(instance, ProblemFile):
            instance, model = instance.instance, instance.ambiguity
        if model is None:
            raise ValueError("an ambiguity model is required")
        cfg = self.config()
        self.equivalence_ = check_equivalence(instance, model, cfg)
        self.enlargement_ = enlargement_invariance(instance, model)
        self.history_ = history_dependent_check(instance, model, cfg) if self.history else None
        return self

    @property
    def passed_(self):
        if not hasattr(self, "equivalence_"):
            raise NotFittedError("StaticOracle is not fitted yet; call fit first")
        ok = self.equivalence_.passed and self.enlargement_.invariant
        if self.history_ is not None:
            ok = ok and all(v is not False for v in self.history_.verdicts.values())
        return ok
