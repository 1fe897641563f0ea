"""Mean-field consistency by damped Picard iteration on measure curves.

``T(curve)``: solve the HJB equation against ``curve``, inject the optimal
feedback into the kinetic equation started from the scenario's initial law.
A fixed point of ``T`` is a mean-field equilibrium.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .hjb import ValueGrid, solve_hjb
from .kinetic import solve_kinetic
from .measures import MeasureCurve
from .model import FeedbackControl

log = logging.getLogger(__name__)

__all__ = [
    "FixedPointConfig",
    "EquilibriumSolution",
    "best_response",
    "solve_equilibrium",
    "consistency_residual",
]


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.5
    max_iters: int = 50
    tol: float = 1e-6
    adapt_damping: bool = True

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("fixed_point.damping: must lie in (0, 1]")
        if int(self.max_iters) < 1:
            raise ValueError("fixed_point.max_iters: must be >= 1")
        if not self.tol > 0:
            raise ValueError("fixed_point.tol: must be > 0")


@dataclass
class EquilibriumSolution:
    curve: MeasureCurve
    policy: FeedbackControl
    value: ValueGrid
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    def history_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["iter", "residual", "theta"])
        for it, r, th in self.history:
            wr.writerow([it, repr(float(r)), repr(float(th))])
        return buf.getvalue()


def _response(curve: MeasureCurve, scenario):
    mu0 = scenario.initial_measure()
    if not np.allclose(curve.weights[0], mu0.weights, rtol=0, atol=1e-12):
        raise ValueError("curve must start at the scenario's initial measure")
    vg = solve_hjb(curve, scenario.costs, scenario.kernel, scenario.controls)
    new = solve_kinetic(mu0, vg.policy, scenario.kernel, scenario.kinetic_config(), scenario.horizon,
                        controls=scenario.controls)
    return new, vg


def best_response(curve: MeasureCurve, scenario) -> MeasureCurve:
    """``T(curve)``: the flow induced by the optimal feedback against ``curve``."""
    return _response(curve, scenario)[0]


def solve_equilibrium(scenario, cfg: FixedPointConfig | None = None,
                      initial_curve: MeasureCurve | None = None) -> EquilibriumSolution:
    """Damped Picard iteration ``curve <- (1 - theta) curve + theta T(curve)``.

    The residual is ``sup_t ||T(curve)_t - curve_t||_TV``.  When it rises on
    two consecutive iterations the damping is halved.  Exhausting
    ``max_iters`` returns the iterate with the smallest residual, flagged as
    not converged.
    """
    cfg = cfg if cfg is not None else scenario.fixed_point
    curve = initial_curve
    if curve is None:
        curve = MeasureCurve.constant(scenario.initial_measure(), scenario.time_grid())
    theta = cfg.damping
    history = []
    best = None
    rises = 0
    prev = np.inf
    for it in range(1, cfg.max_iters + 1):
        new, vg = _response(curve, scenario)
        r = curve.sup_tv(new)
        history.append((it, r, theta))
        log.info("picard iter %d residual %.3e theta %.3g", it, r, theta)
        if best is None or r < best[0]:
            best = (r, curve, vg, it)
        if r <= cfg.tol:
            return EquilibriumSolution(curve, vg.policy, vg, r, it, True, history)
        rises = rises + 1 if r > prev else 0
        if cfg.adapt_damping and rises >= 2:
            theta *= 0.5
            rises = 0
        prev = r
        curve = curve.blend(new, theta)
    r, curve, vg, _ = best
    log.warning("Picard iteration did not reach tol=%.1e in %d iterations (best residual %.3e)",
                cfg.tol, cfg.max_iters, r)
    return EquilibriumSolution(curve, vg.policy, vg, r, cfg.max_iters, False, history)


def consistency_residual(solution: EquilibriumSolution, scenario) -> float:
    """``sup_t`` TV between the curve and the flow its own policy induces."""
    flow = solve_kinetic(scenario.initial_measure(), solution.policy, scenario.kernel,
                         scenario.kinetic_config(), scenario.horizon, controls=scenario.controls)
    return solution.curve.sup_tv(flow)
