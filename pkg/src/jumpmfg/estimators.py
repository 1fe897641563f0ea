"""scikit-learn style front-ends over the solvers.

Hyperparameters are constructor arguments (so ``get_params``/``set_params``
and ``clone`` work); ``fit`` stores results in trailing-underscore
attributes.  ``predict`` evaluates the fitted object at states ``X`` and a
time ``t``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_policy, check_probability, check_states, check_time
from .hjb import solve_hjb
from .kinetic import KineticSolveConfig, solve_kinetic
from .measures import MeasureCurve
from .mfg import FixedPointConfig, solve_equilibrium
from .model import ControlSet, CostSpec, JumpKernelSpec

__all__ = ["KineticFlow", "HJBSolver", "MeanFieldGame"]


class KineticFlow(BaseEstimator):
    """Forward flow of an initial law under a fixed feedback control."""

    def __init__(self, kernel=None, controls=None, horizon=1.0, t_steps=200, integrator="rk4",
                 clip_negatives=True):
        self.kernel = kernel
        self.controls = controls
        self.horizon = horizon
        self.t_steps = t_steps
        self.integrator = integrator
        self.clip_negatives = clip_negatives

    def fit(self, mu0, policy=0.0):
        mu0 = check_probability(mu0)
        k = self.kernel if self.kernel is not None else JumpKernelSpec()
        cfg = KineticSolveConfig(self.t_steps, self.integrator, self.clip_negatives)
        times = np.linspace(0.0, self.horizon, self.t_steps + 1)
        gamma = check_policy(policy, times, mu0.lattice.size, self.controls)
        self.curve_, self.diagnostics_ = solve_kinetic(mu0, gamma, k, cfg, self.horizon, controls=self.controls,
                                                       return_diagnostics=True)
        return self

    def predict(self, t):
        """Node masses at the grid time nearest ``t``."""
        check_is_fitted(self, "curve_")
        t = check_time(t, self.horizon)
        i = int(np.argmin(np.abs(self.curve_.times - t)))
        return np.asarray(self.curve_.weights[i])

    def transform(self, ts):
        """Means of the flow at the times ``ts``, shape ``(len(ts), dim)``."""
        check_is_fitted(self, "curve_")
        return np.stack([self.curve_[int(np.argmin(np.abs(self.curve_.times - check_time(t, self.horizon))))].mean()
                         for t in np.atleast_1d(ts)])


class HJBSolver(BaseEstimator):
    """Value function and optimal feedback against a frozen measure curve."""

    def __init__(self, kernel=None, costs=None, controls=None):
        self.kernel = kernel
        self.costs = costs
        self.controls = controls

    def fit(self, curve: MeasureCurve):
        if not isinstance(curve, MeasureCurve):
            raise TypeError("fit expects a MeasureCurve")
        self.value_ = solve_hjb(curve, self.costs or CostSpec(), self.kernel or JumpKernelSpec(),
                                self.controls or ControlSet())
        self.policy_ = self.value_.policy
        return self

    def predict(self, X, t=0.0):
        """Optimal controls at states ``X`` and time ``t``."""
        check_is_fitted(self, "value_")
        lat = self.value_.lattice
        X = check_states(X, lat)
        t = check_time(t, float(self.value_.times[-1]))
        return self.policy_.value_at(t)[lat.nearest_node(X)]

    def score_samples(self, X, t=0.0):
        """Value ``W(t, x)`` at states ``X``."""
        check_is_fitted(self, "value_")
        X = check_states(X, self.value_.lattice)
        return self.value_.value_at(check_time(t, float(self.value_.times[-1])), X[:, 0])


class MeanFieldGame(BaseEstimator):
    """Equilibrium of the mean-field game started from a given initial law.

    ``scenario`` supplies the kernel, costs, controls and grids; the fitted
    initial law replaces the scenario's own.
    """

    def __init__(self, scenario=None, damping=None, max_iters=None, tol=None):
        self.scenario = scenario
        self.damping = damping
        self.max_iters = max_iters
        self.tol = tol

    def _fixed_point(self, sc):
        base = sc.fixed_point
        return FixedPointConfig(
            damping=base.damping if self.damping is None else self.damping,
            max_iters=base.max_iters if self.max_iters is None else self.max_iters,
            tol=base.tol if self.tol is None else self.tol,
            adapt_damping=base.adapt_damping,
        )

    def fit(self, mu0=None):
        if self.scenario is None:
            from .config import load_scenario
            sc = load_scenario("default")
        else:
            sc = self.scenario
        view = _ScenarioView(sc, None if mu0 is None else check_probability(mu0, sc.lattice))
        sol = solve_equilibrium(view, self._fixed_point(sc))
        self.solution_ = sol
        self.curve_ = sol.curve
        self.policy_ = sol.policy
        self.value_ = sol.value
        self.residual_ = sol.residual
        self.n_iter_ = sol.iterations
        self.converged_ = sol.converged
        self.history_ = list(sol.history)
        return self

    def predict(self, X, t=0.0):
        """Equilibrium controls at states ``X`` and time ``t``."""
        check_is_fitted(self, "policy_")
        lat = self.value_.lattice
        X = check_states(X, lat)
        t = check_time(t, float(self.value_.times[-1]))
        return self.policy_.value_at(t)[lat.nearest_node(X)]


class _ScenarioView:
    """A scenario with its initial law swapped out."""

    def __init__(self, scenario, mu0):
        self._sc = scenario
        self._mu0 = mu0

    def __getattr__(self, name):
        return getattr(self._sc, name)

    def initial_measure(self):
        return self._mu0 if self._mu0 is not None else self._sc.initial_measure()
