"""Forward solver for the nonlinear kinetic equation ``d/dt mu = A*[t, mu, gamma] mu``."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .measures import GridMeasure, MeasureCurve, tv_distance
from .model import ControlSet, FeedbackControl, JumpKernelSpec, destination_matrix

log = logging.getLogger(__name__)

__all__ = [
    "KineticSolveConfig",
    "StabilityError",
    "kinetic_step",
    "solve_kinetic",
    "initial_sensitivity_probe",
]

NEGATIVE_TOL = 1e-12
CLIPPED_MASS_LIMIT = 1e-6


class StabilityError(ValueError):
    """Explicit step size violates ``dt * lambda_max <= 0.5``."""


@dataclass(frozen=True)
class KineticSolveConfig:
    t_steps: int = 200
    integrator: str = "rk4"
    clip_negatives: bool = True

    def __post_init__(self):
        if int(self.t_steps) < 10:
            raise ValueError("kinetic.t_steps: must be >= 10")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError("kinetic.integrator: must be 'euler' or 'rk4'")


def _rhs(k: JumpKernelSpec, lattice, w: np.ndarray, u: np.ndarray) -> np.ndarray:
    mass = w.sum()
    mean = float(w @ lattice.x / mass) if mass > 0 else 0.0
    Q = destination_matrix(k, lattice, mean)
    flux = k.rate(u) * w
    return flux @ Q - flux


def _check_guard(k, dt, controls, u):
    lam = k.max_rate(controls) if controls is not None else float(np.max(k.rate(u)))
    if dt * lam > 0.5:
        raise StabilityError(
            f"dt={dt:g} violates dt*lambda_max <= 0.5 (lambda_max={lam:g}); use dt <= {0.5 / lam:g}")


def _step_weights(k, lattice, w, u, dt, integrator):
    if integrator == "euler":
        return w + dt * _rhs(k, lattice, w, u)
    k1 = _rhs(k, lattice, w, u)
    k2 = _rhs(k, lattice, w + 0.5 * dt * k1, u)
    k3 = _rhs(k, lattice, w + 0.5 * dt * k2, u)
    k4 = _rhs(k, lattice, w + dt * k3, u)
    return w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _clip(w, clip_negatives):
    """Return ``(weights, clipped_mass, min_weight)``."""
    wmin = float(w.min())
    if wmin >= 0:
        return w, 0.0, wmin
    if not clip_negatives:
        return w, 0.0, wmin
    neg = w < 0
    if wmin < -NEGATIVE_TOL * max(1.0, w.sum()):
        raise FloatingPointError(f"negative weight {wmin:.3e} exceeds clipping tolerance")
    clipped = float(-w[neg].sum())
    mass = w.sum()
    w = np.where(neg, 0.0, w)
    return w * (mass / w.sum()), clipped, wmin


def kinetic_step(m: GridMeasure, t: float, dt: float, gamma, k: JumpKernelSpec,
                 integrator: str = "euler", clip_negatives: bool = True,
                 controls: ControlSet | None = None) -> GridMeasure:
    """One explicit step; the control is frozen at its value in the cell containing ``t``."""
    u = gamma.value_at(t) if isinstance(gamma, FeedbackControl) else np.broadcast_to(gamma, (m.lattice.size,))
    _check_guard(k, dt, controls, u)
    w = _step_weights(k, m.lattice, np.asarray(m.weights), u, dt, integrator)
    w, _, _ = _clip(w, clip_negatives)
    return GridMeasure(m.lattice, np.clip(w, 0.0, None))


def solve_kinetic(mu0: GridMeasure, gamma, k: JumpKernelSpec, cfg: KineticSolveConfig, T: float,
                  controls: ControlSet | None = None, return_diagnostics: bool = False):
    """Integrate the kinetic equation on ``t_steps`` uniform steps over ``[0, T]``.

    Step ``n`` freezes the feedback at ``gamma.value_at(t_n)``.  With
    ``return_diagnostics`` a dict with mass drift, pre-clip minimum weight and
    cumulative clipped mass is returned alongside the curve.
    """
    if abs(mu0.mass - 1.0) > 1e-9:
        raise ValueError("initial measure must be a probability measure")
    lat = mu0.lattice
    if T == 0:
        curve = MeasureCurve(lat, [0.0], mu0.weights[None, :])
        diag = {"mass_drift": 0.0, "min_weight": float(mu0.weights.min()), "clipped_mass": 0.0}
        return (curve, diag) if return_diagnostics else curve
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    n = cfg.t_steps
    times = np.linspace(0.0, T, n + 1)
    dt = T / n
    W = np.empty((n + 1, lat.size))
    W[0] = mu0.weights
    clipped_total, wmin_total = 0.0, float(mu0.weights.min())
    for s in range(n):
        t = times[s]
        u = gamma.value_at(t) if isinstance(gamma, FeedbackControl) else np.broadcast_to(gamma, (lat.size,))
        if s == 0:
            _check_guard(k, dt, controls, u)
        w = _step_weights(k, lat, W[s], u, dt, cfg.integrator)
        w, clipped, wmin = _clip(w, cfg.clip_negatives)
        clipped_total += clipped
        wmin_total = min(wmin_total, wmin)
        W[s + 1] = w
    if clipped_total > CLIPPED_MASS_LIMIT:
        raise FloatingPointError(f"cumulative clipped mass {clipped_total:.3e} exceeds {CLIPPED_MASS_LIMIT}")
    if clipped_total > 0:
        log.debug("kinetic solve clipped %.3e total negative mass", clipped_total)
    curve = MeasureCurve(lat, times, W)
    if return_diagnostics:
        diag = {
            "mass_drift": float(np.abs(W.sum(axis=1) - 1.0).max()),
            "min_weight": wmin_total,
            "clipped_mass": clipped_total,
        }
        return curve, diag
    return curve


def initial_sensitivity_probe(mu0: GridMeasure, eta0: GridMeasure, gamma, k: JumpKernelSpec,
                              cfg: KineticSolveConfig, T: float):
    """Ratios ``||mu_t - eta_t||_TV / ||mu_0 - eta_0||_TV`` along the time grid.

    Returns ``(times, ratios)``.
    """
    d0 = tv_distance(mu0, eta0)
    if d0 == 0:
        raise ValueError("initial measures coincide; sensitivity ratio undefined")
    a = solve_kinetic(mu0, gamma, k, cfg, T)
    b = solve_kinetic(eta0, gamma, k, cfg, T)
    return a.times, np.abs(a.weights - b.weights).sum(axis=1) / d0
