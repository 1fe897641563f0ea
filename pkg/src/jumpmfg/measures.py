"""Finite measures on a regular box lattice, empirical measures and pairings.

A :class:`GridMeasure` stores the mass carried by every node of a
:class:`Lattice`; it is *not* a density.  Pairings with grid functions are
plain sums ``(f, mu) = sum_i f_i w_i``.  Empirical measures carry atoms at
arbitrary points of the box; grid functions are evaluated at such atoms by
multilinear interpolation, and :func:`deposit` spreads each atom onto the
corners of its cell with the same (tent) weights.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Lattice",
    "GridMeasure",
    "EmpiricalMeasure",
    "MeasureCurve",
    "TestFunctional",
    "LatticeMismatchError",
    "total_mass",
    "tv_distance",
    "pair",
    "deposit",
    "interpolate",
]


class LatticeMismatchError(ValueError):
    """Raised when two objects that must share a lattice do not."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Lattice:
    """Uniform tensor lattice on the box ``[domain_min, domain_max]``.

    Nodes are ordered in C order over the axes (last axis fastest).
    """

    domain_min: np.ndarray
    domain_max: np.ndarray
    nodes_per_axis: int

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.domain_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.domain_max, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("domain_min and domain_max must be vectors of equal length")
        if np.any(hi <= lo):
            raise ValueError("domain_max must exceed domain_min on every axis")
        n = int(self.nodes_per_axis)
        if n < 2:
            raise ValueError("nodes_per_axis must be at least 2")
        object.__setattr__(self, "domain_min", _frozen(lo))
        object.__setattr__(self, "domain_max", _frozen(hi))
        object.__setattr__(self, "nodes_per_axis", n)

    @classmethod
    def unit(cls, nodes: int = 101, dim: int = 1) -> "Lattice":
        return cls(np.zeros(dim), np.ones(dim), nodes)

    @property
    def dim(self) -> int:
        return self.domain_min.shape[0]

    @property
    def size(self) -> int:
        return self.nodes_per_axis ** self.dim

    @property
    def spacing(self) -> np.ndarray:
        return (self.domain_max - self.domain_min) / (self.nodes_per_axis - 1)

    @property
    def axes(self) -> list:
        return [np.linspace(lo, hi, self.nodes_per_axis)
                for lo, hi in zip(self.domain_min, self.domain_max)]

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def x(self) -> np.ndarray:
        """Node coordinates of a one-dimensional lattice."""
        if self.dim != 1:
            raise ValueError("x is only defined for one-dimensional lattices")
        return self.axes[0]

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Tensor trapezoid weights (sum to the box volume)."""
        w1 = []
        for h in self.spacing:
            w = np.full(self.nodes_per_axis, h)
            w[[0, -1]] = h / 2
            w1.append(w)
        out = w1[0]
        for w in w1[1:]:
            out = np.multiply.outer(out, w)
        return np.ravel(out)

    def same_as(self, other: "Lattice") -> bool:
        return (self is other) or (
            self.nodes_per_axis == other.nodes_per_axis
            and np.array_equal(self.domain_min, other.domain_min)
            and np.array_equal(self.domain_max, other.domain_max)
        )

    def contains(self, points, atol: float = 1e-12) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.domain_min - atol) & (p <= self.domain_max + atol), axis=1)

    def nearest_node(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.rint((p - self.domain_min) / self.spacing).astype(int)
        idx = np.clip(idx, 0, self.nodes_per_axis - 1)
        return np.ravel_multi_index(tuple(idx.T), (self.nodes_per_axis,) * self.dim)

    def cell_weights(self, points):
        """Corner node indices and multilinear weights for each point.

        Returns ``(nodes, weights)`` of shape ``(n_points, 2**dim)``.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if p.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        if not np.all(self.contains(p)):
            raise ValueError("point outside the domain box")
        n = self.nodes_per_axis
        s = np.clip((p - self.domain_min) / self.spacing, 0.0, n - 1)
        base = np.minimum(np.floor(s).astype(int), n - 2)
        frac = s - base
        nodes, weights = [], []
        for corner in itertools.product((0, 1), repeat=self.dim):
            c = np.asarray(corner)
            idx = base + c
            w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
            nodes.append(np.ravel_multi_index(tuple(idx.T), (n,) * self.dim))
            weights.append(w)
        return np.stack(nodes, axis=1), np.stack(weights, axis=1)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Nonnegative node masses on a lattice."""

    lattice: Lattice
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape[0] != self.lattice.size:
            raise ValueError(f"expected {self.lattice.size} weights, got {w.shape[0]}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def from_density(cls, lattice: Lattice, density) -> "GridMeasure":
        """Probability measure with node masses proportional to density times quadrature weight."""
        w = np.asarray(density, dtype=float) * lattice.quadrature_weights
        return cls(lattice, w / w.sum())

    @classmethod
    def dirac(cls, lattice: Lattice, node: int, mass: float = 1.0) -> "GridMeasure":
        w = np.zeros(lattice.size)
        w[node] = mass
        return cls(lattice, w)

    @classmethod
    def uniform(cls, lattice: Lattice) -> "GridMeasure":
        return cls(lattice, np.full(lattice.size, 1.0 / lattice.size))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def mean(self) -> np.ndarray:
        return self.weights @ self.lattice.coords / self.mass

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["node_index"] + [f"x{i + 1}" for i in range(self.lattice.dim)] + ["weight"])
        for i, (c, w) in enumerate(zip(self.lattice.coords, self.weights)):
            wr.writerow([i] + [repr(float(v)) for v in c] + [repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, lattice: Lattice) -> "GridMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        w = np.zeros(lattice.size)
        for row in rows[1:]:
            w[int(row[0])] = float(row[-1])
        return cls(lattice, w)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """``(1/N) sum_i delta_{x_i}``; points have shape ``(N, dim)``."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.ndim != 2 or p.shape[0] < 1:
            raise ValueError("points must be a non-empty (N, dim) array")
        object.__setattr__(self, "points", _frozen(p))

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def atom_weight(self) -> float:
        return 1.0 / self.n_atoms

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True, eq=False)
class MeasureCurve:
    """Time-indexed family of measures sharing one lattice.

    ``weights[k]`` holds the node masses at ``times[k]``.
    """

    lattice: Lattice
    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if w.shape != (t.size, self.lattice.size):
            raise ValueError(f"weights must have shape {(t.size, self.lattice.size)}, got {w.shape}")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def from_snapshots(cls, times, snapshots: Sequence[GridMeasure]) -> "MeasureCurve":
        lat = snapshots[0].lattice
        for s in snapshots[1:]:
            if not s.lattice.same_as(lat):
                raise LatticeMismatchError("all snapshots must share one lattice")
        return cls(lat, times, np.stack([s.weights for s in snapshots]))

    @classmethod
    def constant(cls, measure: GridMeasure, times) -> "MeasureCurve":
        t = np.asarray(times, dtype=float)
        return cls(measure.lattice, t, np.tile(measure.weights, (t.size, 1)))

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, k: int) -> GridMeasure:
        return GridMeasure(self.lattice, np.clip(self.weights[k], 0.0, None))

    @property
    def snapshots(self) -> list:
        return [self[k] for k in range(len(self))]

    def means(self) -> np.ndarray:
        """Mean state of each snapshot, shape ``(len, dim)``."""
        return (self.weights @ self.lattice.coords) / self.weights.sum(axis=1, keepdims=True)

    def masses(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def sup_tv(self, other: "MeasureCurve") -> float:
        if not self.lattice.same_as(other.lattice) or len(self) != len(other):
            raise LatticeMismatchError("curves must share lattice and time grid")
        return float(np.abs(self.weights - other.weights).sum(axis=1).max())

    def blend(self, other: "MeasureCurve", theta: float) -> "MeasureCurve":
        """Snapshot-wise convex combination ``(1 - theta) self + theta other``."""
        if not self.lattice.same_as(other.lattice) or len(self) != len(other):
            raise LatticeMismatchError("curves must share lattice and time grid")
        return MeasureCurve(self.lattice, self.times,
                            (1.0 - theta) * self.weights + theta * other.weights)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["time", "node_index", "weight"])
        for t, row in zip(self.times, self.weights):
            for i, w in enumerate(row):
                wr.writerow([repr(float(t)), i, repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, lattice: Lattice) -> "MeasureCurve":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        times = sorted({float(r[0]) for r in rows})
        pos = {t: k for k, t in enumerate(times)}
        w = np.zeros((len(times), lattice.size))
        for r in rows:
            w[pos[float(r[0])], int(r[1])] = float(r[2])
        return cls(lattice, times, w)


@dataclass(frozen=True, eq=False)
class TestFunctional:
    """``F(mu) = (g, mu)`` (``kind='linear'``) or ``(g, mu)**2`` (``'quadratic'``)."""

    __test__ = False  # keep pytest from collecting this class

    lattice: Lattice
    g: np.ndarray
    kind: str = "linear"

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic"):
            raise ValueError("kind must be 'linear' or 'quadratic'")
        g = np.asarray(self.g, dtype=float).ravel()
        if g.size != self.lattice.size:
            raise ValueError("g must have one value per lattice node")
        object.__setattr__(self, "g", _frozen(g))

    def __call__(self, m) -> float:
        return pair(self, m)


Measure = Union[GridMeasure, EmpiricalMeasure]


def total_mass(m: GridMeasure) -> float:
    return float(np.sum(m.weights))


def tv_distance(a: GridMeasure, b: GridMeasure) -> float:
    """Total variation norm of ``a - b`` (sum of absolute node differences)."""
    if not a.lattice.same_as(b.lattice):
        raise LatticeMismatchError("measures live on different lattices")
    return float(np.abs(a.weights - b.weights).sum())


def interpolate(lattice: Lattice, g, points) -> np.ndarray:
    """Multilinear interpolation of the grid function ``g`` at ``points``."""
    nodes, w = lattice.cell_weights(points)
    return np.sum(np.asarray(g, dtype=float)[nodes] * w, axis=1)


def pair(F: TestFunctional, m: Measure) -> float:
    if isinstance(m, EmpiricalMeasure):
        lin = float(np.mean(interpolate(F.lattice, F.g, m.points)))
    else:
        if not m.lattice.same_as(F.lattice):
            raise LatticeMismatchError("functional and measure live on different lattices")
        lin = float(F.g @ m.weights)
    return lin if F.kind == "linear" else lin * lin


def deposit(e: EmpiricalMeasure, lattice: Lattice) -> GridMeasure:
    """Spread each atom's mass ``1/N`` onto its cell corners with tent weights."""
    nodes, w = lattice.cell_weights(e.points)
    out = np.bincount(nodes.ravel(), weights=w.ravel() / e.n_atoms, minlength=lattice.size)
    return GridMeasure(lattice, out)
