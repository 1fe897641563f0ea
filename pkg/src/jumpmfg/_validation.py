"""Input checks shared by the estimator front-ends."""
from __future__ import annotations

import numpy as np

from .measures import GridMeasure, Lattice
from .model import FeedbackControl


def check_probability(mu0, lattice: Lattice | None = None) -> GridMeasure:
    """Accept a GridMeasure or a weight vector; require unit mass."""
    if not isinstance(mu0, GridMeasure):
        if lattice is None:
            raise TypeError("a raw weight vector needs a lattice")
        mu0 = GridMeasure(lattice, np.asarray(mu0, dtype=float))
    if abs(mu0.mass - 1.0) > 1e-9:
        raise ValueError(f"initial measure has mass {mu0.mass:.12g}, expected 1")
    return mu0


def check_policy(policy, times, n_nodes: int, controls=None) -> FeedbackControl:
    """Accept a FeedbackControl, a scalar, or a per-node vector held constant in time."""
    if isinstance(policy, FeedbackControl):
        fc = policy
    else:
        arr = np.asarray(policy, dtype=float)
        t = np.asarray(times, dtype=float)
        if arr.ndim == 0:
            fc = FeedbackControl.constant(float(arr), t, n_nodes)
        elif arr.ndim == 1:
            if arr.size != n_nodes:
                raise ValueError(f"policy has {arr.size} nodes, lattice has {n_nodes}")
            fc = FeedbackControl(t, np.broadcast_to(arr, (t.size, n_nodes)))
        else:
            fc = FeedbackControl(t, arr)
    if fc.n_nodes != n_nodes:
        raise ValueError(f"policy has {fc.n_nodes} nodes, lattice has {n_nodes}")
    if controls is not None and not fc.within(controls):
        raise ValueError("policy takes values outside the control set")
    return fc


def check_states(X, lattice: Lattice) -> np.ndarray:
    """Column of states inside the box, shape ``(n, 1)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != lattice.dim:
        raise ValueError(f"expected states of shape (n, {lattice.dim})")
    if not np.all(lattice.contains(X)):
        raise ValueError("states outside the domain box")
    return X


def check_time(t, horizon: float) -> float:
    t = float(t)
    if not 0.0 <= t <= horizon:
        raise ValueError(f"time {t:g} outside [0, {horizon:g}]")
    return t
