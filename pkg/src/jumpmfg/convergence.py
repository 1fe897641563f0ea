"""Monte-Carlo measurement of the N-player to mean-field gaps and power-law rate fits."""
from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kinetic import solve_kinetic
from .measures import MeasureCurve, TestFunctional, pair
from .model import FeedbackControl
from .particle import SimConfig, payoff_estimate, simulate_nplayer, simulate_tagged_arms

log = logging.getLogger(__name__)

__all__ = [
    "RateFit",
    "NashGapEstimate",
    "centred_quadratic",
    "koopman_value",
    "functional_gap",
    "functional_gap_adaptive",
    "default_deviations",
    "nash_gap",
    "rate_fit",
    "results_csv",
]


@dataclass
class RateFit:
    N: np.ndarray
    gaps: np.ndarray
    ses: np.ndarray
    slope: float
    intercept: float
    ci: tuple
    birge_ratio: float
    dropped: list = field(default_factory=list)

    @property
    def ci_excludes_zero(self) -> bool:
        return self.ci[0] > 0 or self.ci[1] < 0


@dataclass
class NashGapEstimate:
    """``gap`` is floored at zero; ``raw_gap`` keeps the sign."""

    gap: float
    se: float
    raw_gap: float
    differences: np.ndarray
    std_errors: np.ndarray
    reps: int

    def __iter__(self):
        return iter((self.gap, self.se))


def centred_quadratic(curve: MeasureCurve) -> TestFunctional:
    """``F(mu) = ((x - m_T), mu)^2`` with ``m_T`` the terminal mean of ``curve``; zero on the limit."""
    lat = curve.lattice
    return TestFunctional(lat, lat.x - curve.means()[-1, 0], kind="quadratic")


def koopman_value(F: TestFunctional, scenario, gamma: FeedbackControl, T: float | None = None) -> float:
    """``F(alpha(0, T, mu_0))``: the functional composed with the deterministic flow."""
    T = scenario.horizon if T is None else T
    curve = solve_kinetic(scenario.initial_measure(), gamma, scenario.kernel, scenario.kinetic_config(), T,
                          controls=scenario.controls)
    return F(curve[-1])


def _functional_samples(F, N, reps, scenario, gamma, T, seed, stratified, workers, rep_offset=0):
    cfg = SimConfig(N=N, reps=reps + rep_offset, seed=seed, record_dt=T, stratified=stratified)
    recs = simulate_nplayer(scenario.kernel, gamma, cfg, T, scenario.initial_measure(), scenario.costs,
                            scenario.controls, workers=workers)
    return np.array([pair(F, r.grid_measure(-1)) for r in recs[rep_offset:]])


def functional_gap(F: TestFunctional, N: int, reps: int, scenario, gamma: FeedbackControl,
                   T: float | None = None, seed: int = 0, stratified: bool = True, workers: int = 1):
    """``|E F(mu^N_T) - F(mu_T)|`` and its standard error.

    The empirical side deposits the terminal particle configuration on the
    lattice; initial states are stratified draws from ``mu_0``.
    """
    T = scenario.horizon if T is None else T
    if reps < 2:
        raise ValueError("reps must be >= 2")
    limit = koopman_value(F, scenario, gamma, T)
    vals = _functional_samples(F, N, reps, scenario, gamma, T, seed, stratified, workers)
    return abs(float(vals.mean()) - limit), float(vals.std(ddof=1) / np.sqrt(reps))


def functional_gap_adaptive(F: TestFunctional, N: int, scenario, gamma: FeedbackControl,
                            T: float | None = None, seed: int = 0, reps0: int = 200, max_reps: int = 20000,
                            se_ratio: float = 0.2, workers: int = 1):
    """Double the replica count until ``se <= se_ratio * gap`` or ``max_reps`` is reached.

    Returns ``(gap, se, reps_used)``.  Replica ``r`` is the same draw at every
    stage, so extending the sample reuses the earlier replicas.
    """
    T = scenario.horizon if T is None else T
    limit = koopman_value(F, scenario, gamma, T)
    vals = _functional_samples(F, N, reps0, scenario, gamma, T, seed, True, workers)
    while True:
        gap = abs(float(vals.mean()) - limit)
        se = float(vals.std(ddof=1) / np.sqrt(vals.size))
        if se <= se_ratio * gap or vals.size >= max_reps:
            break
        extra = min(vals.size, max_reps - vals.size)
        more = _functional_samples(F, N, extra, scenario, gamma, T, seed, True, workers, rep_offset=vals.size)
        vals = np.concatenate([vals, more])
    if se > se_ratio * gap:
        log.warning("functional gap at N=%d hit the replica cap %d with se/gap=%.3g", N, max_reps,
                    se / gap if gap > 0 else np.inf)
    return gap, se, int(vals.size)


def default_deviations(equilibrium, controls, n_constants: int = 5, shift: float = 0.1) -> list:
    """Constant controls on an evenly spaced grid over the control set, plus the equilibrium feedback shifted by +-shift."""
    pol = equilibrium.policy
    devs = [FeedbackControl.constant(u, pol.times, pol.n_nodes) for u in controls.grid(n_constants)]
    devs.append(pol.shifted(shift, controls))
    devs.append(pol.shifted(-shift, controls))
    return devs


def nash_gap(N: int, reps: int, scenario, equilibrium, deviations: list | None = None, seed: int = 0,
             x0_first=None, T: float | None = None, workers: int = 1) -> NashGapEstimate:
    """Largest mean payoff gain of a tagged deviator over following the equilibrium feedback.

    Every arm runs on the same random inputs, so each gain is a paired
    difference; its SE is the SE of the per-replica differences.
    """
    T = scenario.horizon if T is None else T
    gamma = equilibrium.policy
    if deviations is None:
        deviations = default_deviations(equilibrium, scenario.controls)
    if reps < 2:
        raise ValueError("reps must be >= 2")
    cfg = SimConfig(N=N, reps=reps, seed=seed, record_dt=T, stratified=False)
    arms = simulate_tagged_arms(scenario.kernel, gamma, [gamma] + list(deviations), cfg, T,
                                scenario.initial_measure(), x0_first, scenario.costs, scenario.controls,
                                workers=workers)
    base = np.array([r.payoff[0] for r in arms[0]])
    diffs, ses = [], []
    for arm in arms[1:]:
        d = np.array([r.payoff[0] for r in arm]) - base
        diffs.append(float(d.mean()))
        ses.append(float(d.std(ddof=1) / np.sqrt(d.size)))
    diffs, ses = np.array(diffs), np.array(ses)
    if diffs.size == 0:
        return NashGapEstimate(0.0, 0.0, 0.0, diffs, ses, reps)
    i = int(np.argmax(diffs))
    return NashGapEstimate(max(0.0, float(diffs[i])), float(ses[i]), float(diffs[i]), diffs, ses, reps)


def _wls(logN, logg, w):
    X = np.column_stack([np.ones_like(logN), logN])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], logg * sw, rcond=None)
    return coef


def rate_fit(points, n_boot: int = 1000, seed: int = 0, level: float = 0.95) -> RateFit:
    """Weighted least squares of ``log gap`` on ``log N`` with weights ``(gap/se)^2``.

    The confidence interval is a parametric bootstrap: log-gaps are redrawn
    around the fitted line with their relative standard errors, inflated by the
    Birge ratio ``sqrt(chi2/dof)`` when the scatter exceeds the stated errors.
    Points with ``gap <= 0`` are dropped with a warning.
    """
    pts = sorted((float(n), float(g), float(s)) for n, g, s in points)
    dropped = [p for p in pts if not p[1] > 0]
    if dropped:
        warnings.warn(f"rate_fit: dropping {len(dropped)} point(s) with non-positive gap", RuntimeWarning,
                      stacklevel=2)
    pts = [p for p in pts if p[1] > 0]
    if len(pts) < 4:
        raise ValueError(f"rate_fit needs >= 4 points with positive gap, got {len(pts)}")
    N, g, s = (np.array(c) for c in zip(*pts))
    if np.any(np.diff(N) <= 0):
        raise ValueError("N values must be strictly increasing")
    x, y = np.log(N), np.log(g)
    rel = s / g
    if np.all(rel == 0):
        coef = _wls(x, y, np.ones_like(x))
        return RateFit(N, g, s, float(coef[1]), float(coef[0]), (float(coef[1]), float(coef[1])), 0.0, dropped)
    rel = np.where(rel > 0, rel, rel[rel > 0].min())
    w = 1.0 / rel ** 2
    coef = _wls(x, y, w)
    resid = y - (coef[0] + coef[1] * x)
    dof = x.size - 2
    birge = float(np.sqrt(np.sum(w * resid ** 2) / dof))
    scale = max(1.0, birge)
    rng = np.random.default_rng(seed)
    fitted = coef[0] + coef[1] * x
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        yb = fitted + rng.standard_normal(x.size) * rel * scale
        slopes[b] = _wls(x, yb, w)[1]
    a = 0.5 * (1.0 - level)
    lo, hi = np.quantile(slopes, [a, 1.0 - a])
    return RateFit(N, g, s, float(coef[1]), float(coef[0]), (float(lo), float(hi)), birge, dropped)


def results_csv(rows) -> str:
    """Rows of ``(experiment, N, gap, se, slope, ci_lo, ci_hi)``."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["experiment", "N", "gap", "se", "slope", "ci_lo", "ci_hi"])
    for exp, n, gap, se, slope, lo, hi in rows:
        wr.writerow([exp, int(n), repr(float(gap)), repr(float(se)), repr(float(slope)), repr(float(lo)),
                     repr(float(hi))])
    return buf.getvalue()
