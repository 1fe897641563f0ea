"""Backward dynamic programming for the one-player control problem against a frozen measure curve.

The Hamiltonian ``Theta(u) = J(x, mu, u) + lambda(u) (Q W - W)(x)`` is a
concave quadratic in ``u`` for the parametric family in :mod:`jumpmfg.model`,
so its maximiser over ``[u_min, u_max]`` is the clamped vertex.  Cell ``k``
(``[t_k, t_{k+1})``) uses the snapshot ``mu_{t_k}`` and the value at
``t_{k+1}``; the simulator in :mod:`jumpmfg.particle` freezes data on the same
cells, which keeps Monte-Carlo payoffs and ``W`` comparable.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .kinetic import StabilityError
from .measures import GridMeasure, Lattice, MeasureCurve
from .model import (ControlSet, CostSpec, FeedbackControl, JumpKernelSpec, destination_matrix,
                    running_cost, terminal_cost)

__all__ = [
    "ValueGrid",
    "HamiltonianReport",
    "maximize_hamiltonian",
    "hamiltonian_report",
    "solve_hjb",
    "duhamel_residual",
    "duhamel_values",
    "feedback_regularity_probe",
]


@dataclass(frozen=True, eq=False)
class ValueGrid:
    lattice: Lattice
    times: np.ndarray
    W: np.ndarray
    gamma: np.ndarray

    @property
    def policy(self) -> FeedbackControl:
        return FeedbackControl(self.times, self.gamma)

    def value_at(self, t: float, x) -> np.ndarray:
        """``W`` at grid time nearest ``t`` and the nodes nearest ``x``."""
        k = int(np.clip(np.searchsorted(self.times, t - 1e-12), 0, self.times.size - 1))
        return self.W[k, self.lattice.nearest_node(np.reshape(x, (-1, 1)))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["time", "node_index", "W", "gamma"])
        for t, wrow, grow in zip(self.times, self.W, self.gamma):
            for i, (w, g) in enumerate(zip(wrow, grow)):
                wr.writerow([repr(float(t)), i, repr(float(w)), repr(float(g))])
        return buf.getvalue()


@dataclass
class HamiltonianReport:
    controls: np.ndarray
    theta: np.ndarray
    argmax: float
    curvature: float


def _mean(m) -> float:
    if isinstance(m, GridMeasure):
        return float(m.mean()[0])
    return float(m)


def _argmax(x, mean, D, c: CostSpec, k: JumpKernelSpec, U: ControlSet):
    """Vectorised clamped vertex of the concave quadratic Hamiltonian."""
    if not c.control_curvature > 0:
        raise ValueError("control_curvature must be > 0: Hamiltonian is not strictly concave")
    slope = c.reward_slope - c.state_coupling * x + k.control_gain * D
    u = U.clip(slope / c.control_curvature)
    theta = running_cost(c, x, mean, u) + k.rate(u) * D
    return u, theta


def _continuation(k, lattice, mean, W_next):
    Q = destination_matrix(k, lattice, mean)
    return Q @ W_next - W_next


def maximize_hamiltonian(t: float, node: int, m, W_t, c: CostSpec, k: JumpKernelSpec, U: ControlSet,
                         lattice: Lattice | None = None):
    """Optimal control and Hamiltonian value at one node; returns ``(u*, theta*)``."""
    if not c.control_curvature > 0:
        raise ValueError("control_curvature must be > 0: Hamiltonian is not strictly concave")
    lattice = lattice if lattice is not None else m.lattice
    W_t = np.asarray(W_t, dtype=float)
    if not np.all(np.isfinite(W_t)):
        raise ValueError("W_t must be finite")
    D = _continuation(k, lattice, _mean(m), W_t)
    u, th = _argmax(lattice.x[node], _mean(m), D[node], c, k, U)
    return float(u), float(th)


def hamiltonian_report(t: float, node: int, m, W_t, c: CostSpec, k: JumpKernelSpec, U: ControlSet,
                       lattice: Lattice | None = None, resolution: int | None = None) -> HamiltonianReport:
    """Hamiltonian tabulated on the control grid, with a second-difference curvature at its argmax."""
    lattice = lattice if lattice is not None else m.lattice
    D = _continuation(k, lattice, _mean(m), np.asarray(W_t, dtype=float))[node]
    u = U.grid(resolution)
    theta = running_cost(c, lattice.x[node], _mean(m), u) + k.rate(u) * D
    i = int(np.argmax(theta))
    j = min(max(i, 1), u.size - 2)
    du = u[1] - u[0]
    curv = (theta[j - 1] - 2 * theta[j] + theta[j + 1]) / du ** 2
    return HamiltonianReport(u, theta, float(u[i]), float(curv))


def solve_hjb(curve: MeasureCurve, c: CostSpec, k: JumpKernelSpec, U: ControlSet) -> ValueGrid:
    """Explicit backward sweep ``W_k = W_{k+1} + dt * max_u Theta_k(u)`` on the curve's time grid."""
    lat = curve.lattice
    times = curve.times
    if times.size < 2:
        raise ValueError("curve needs at least two time points")
    dt = np.diff(times)
    lam = k.max_rate(U)
    if dt.max() * lam > 0.5:
        raise StabilityError(
            f"dt={dt.max():g} violates dt*lambda_max <= 0.5; use dt <= {0.5 / lam:g}")
    means = curve.means()[:, 0]
    x = lat.x
    K = times.size - 1
    W = np.empty((K + 1, lat.size))
    G = np.empty((K + 1, lat.size))
    W[K] = terminal_cost(c, x, means[K])
    G[K], _ = _argmax(x, means[K], _continuation(k, lat, means[K], W[K]), c, k, U)
    for n in range(K - 1, -1, -1):
        D = _continuation(k, lat, means[n], W[n + 1])
        G[n], theta = _argmax(x, means[n], D, c, k, U)
        W[n] = W[n + 1] + dt[n] * theta
        if not np.all(np.isfinite(W[n])):
            raise FloatingPointError(f"non-finite value function at t={times[n]:g}")
    return ValueGrid(lat, times.copy(), W, G)


def duhamel_values(vg: ValueGrid, curve: MeasureCurve, c: CostSpec, k: JumpKernelSpec) -> np.ndarray:
    """Values of the frozen feedback ``vg.gamma`` rebuilt from the linear propagator.

    On each cell the generator and running payoff are constant, so
    ``W_k = exp(dt L) W_{k+1} + int_0^dt exp(s L) J ds`` is computed exactly
    from the exponential of an augmented matrix.
    """
    lat = vg.lattice
    x = lat.x
    means = curve.means()[:, 0]
    K = vg.times.size - 1
    n = lat.size
    out = np.empty_like(vg.W)
    out[K] = terminal_cost(c, x, means[K])
    aug = np.zeros((n + 1, n + 1))
    for s in range(K - 1, -1, -1):
        dt = vg.times[s + 1] - vg.times[s]
        u = vg.gamma[s]
        Q = destination_matrix(k, lat, means[s])
        aug[:n, :n] = k.rate(u)[:, None] * (Q - np.eye(n))
        aug[:n, n] = running_cost(c, x, means[s], u)
        E = expm(dt * aug)
        out[s] = E[:n, :n] @ out[s + 1] + E[:n, n]
    return out


def duhamel_residual(vg: ValueGrid, curve: MeasureCurve, c: CostSpec, k: JumpKernelSpec) -> float:
    return float(np.abs(duhamel_values(vg, curve, c, k) - vg.W).max())


def feedback_regularity_probe(vg: ValueGrid, other: ValueGrid | None = None,
                              curve: MeasureCurve | None = None,
                              other_curve: MeasureCurve | None = None) -> dict:
    """Discrete Lipschitz constant of ``x -> gamma(t, x)`` and, given a second
    solve, the sensitivity of control and value to the measure curve."""
    h = float(vg.lattice.spacing[0])
    report = {
        "lip_x": float(np.abs(np.diff(vg.gamma[:-1], axis=1)).max() / h),
        "lip_x_value": float(np.abs(np.diff(vg.W, axis=1)).max() / h),
    }
    if other is not None:
        if curve is None or other_curve is None:
            raise ValueError("both measure curves are needed to compare two solves")
        num_g = float(np.abs(vg.gamma[:-1] - other.gamma[:-1]).max())
        num_w = float(np.abs(vg.W - other.W).max())
        den = curve.sup_tv(other_curve)
        report.update({
            "control_deviation": num_g,
            "value_deviation": num_w,
            "curve_distance": den,
            "control_ratio": num_g / den if den > 0 else (0.0 if num_g == 0 else np.inf),
            "value_ratio": num_w / den if den > 0 else (0.0 if num_w == 0 else np.inf),
        })
    return report
