"""Mollifier smoothing, hat-function projections and numerical checks of their bounds.

Functions are dense samples on regular grids; every norm is a sampled
seminorm, i.e. a lower estimate of the true norm.  Lipschitz constants are
taken with respect to the l1 distance, so for a differentiable function the
constant is the sup of the largest absolute partial derivative.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, ndimage, optimize

from .measures import EmpiricalMeasure, GridMeasure, Lattice

__all__ = [
    "bump",
    "bump_derivative",
    "bump_second_derivative",
    "MollifierSpec",
    "MollifiedSamples",
    "LatticeProjection",
    "HatInterpolant",
    "mollify",
    "project_function",
    "project_measure",
    "smooth_functional",
    "lipschitz_norm_estimate",
    "functional_lipschitz_estimate",
    "dirac_blip_distance",
    "blip_dual_norm",
    "regularization_schedule",
    "BoundCheck",
    "approximation_bound_checks",
    "bound_report_csv",
]

MAX_DIM = 2
MAX_REFINEMENT = 32


def _raw_bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_constants():
    opts = dict(epsabs=1e-13, epsrel=1e-11, limit=200)
    z = integrate.quad(lambda s: float(_raw_bump(s)), -1, 1, **opts)[0]
    m1 = 2 * integrate.quad(lambda s: s * float(_raw_bump(s)), 0, 1, **opts)[0] / z
    d1 = 2 * integrate.quad(lambda s: abs(float(_d1(s))), 0, 1, **opts)[0] / z
    return z, m1, d1


def _d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    i = np.abs(t) < 1
    s = 1.0 - t[i] ** 2
    out[i] = _raw_bump(t[i]) * (-2.0 * t[i] / s ** 2)
    return out


def _d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    i = np.abs(t) < 1
    s = 1.0 - t[i] ** 2
    ti = t[i]
    out[i] = _raw_bump(ti) * (4.0 * ti ** 2 / s ** 4 - (2.0 + 6.0 * ti ** 2) / s ** 3)
    return out


def bump(t):
    """Normalised smooth bump ``c exp(-1/(1 - t^2))`` on ``(-1, 1)``."""
    return _raw_bump(t) / _bump_constants()[0]


def bump_derivative(t):
    return _d1(t) / _bump_constants()[0]


def bump_second_derivative(t):
    return _d2(t) / _bump_constants()[0]


@dataclass(frozen=True)
class MollifierSpec:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be > 0")

    @property
    def first_moment(self) -> float:
        """``int |t| chi(t) dt``."""
        return _bump_constants()[1]

    @property
    def derivative_l1(self) -> float:
        """``int |chi'(t)| dt``."""
        return _bump_constants()[2]

    @property
    def max_step(self) -> float:
        return self.delta / 20.0


@dataclass(eq=False)
class MollifiedSamples:
    """``value[...]`` on the grid ``axes``; ``gradient[i]`` and ``hessian[i, j]`` are partials."""

    axes: list
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.axes)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def c2_norm(self) -> float:
        """``||g||_bLip + max_j ||d_j g||_bLip`` with sampled sups."""
        sup = float(np.abs(self.value).max())
        lip = float(np.abs(self.gradient).max())
        d_blip = max(float(np.abs(self.gradient[j]).max()) + float(np.abs(self.hessian[:, j]).max())
                     for j in range(self.dim))
        return sup + lip + d_blip


def _kernels(delta: float, h: float):
    p = int(np.ceil(delta / h))
    y = np.arange(-p, p + 1) * h
    w0 = bump(y / delta) / delta * h
    w0 /= w0.sum()
    w1 = bump_derivative(y / delta) / delta ** 2 * h
    w1 /= -(w1 @ y)
    w2 = bump_second_derivative(y / delta) / delta ** 3 * h
    # the Riemann sum of chi'' is not exactly zero at h = delta/20; remove the
    # constant-reproducing part so affine samples have zero curvature
    w2 -= w2.sum() * w0
    w2 /= 0.5 * (w2 @ y ** 2)
    return p, (w0, w1, w2)


def _convolve(samples: np.ndarray, kernels, orders) -> np.ndarray:
    out = samples
    for axis, o in enumerate(orders):
        out = ndimage.convolve1d(out, kernels[o], axis=axis, mode="nearest")
    return out


def mollify(f, spec: MollifierSpec, step: float, lo=0.0, hi=1.0, dim: int = 1) -> MollifiedSamples:
    """``Phi_delta[f]`` and its first two derivatives by convolution quadrature.

    ``f`` is either a callable on points of shape ``(n, dim)``, sampled on the
    box ``[lo, hi]^dim`` padded by ``delta``, or an array of samples with grid
    spacing ``step``; for an array the result covers the interior points whose
    mollifier support lies inside the sampled region.
    """
    if callable(f):
        lo_v = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
        hi_v = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))
        n = np.maximum(np.round((hi_v - lo_v) / step).astype(int), 1)
        h = (hi_v - lo_v) / n
        if not np.allclose(h, h[0], rtol=1e-12):
            raise ValueError("step must give equal spacing on every axis")
        h = float(h[0])
    else:
        samples = np.asarray(f, dtype=float)
        dim = samples.ndim
        h = float(step)
    if dim > MAX_DIM:
        raise ValueError(f"dimension {dim} exceeds the supported maximum {MAX_DIM}")
    if h > spec.max_step * (1 + 1e-12):
        raise ValueError(f"sampling step {h:g} too coarse for delta={spec.delta:g}; need step <= {spec.max_step:g}")
    p, ker = _kernels(spec.delta, h)
    if callable(f):
        axes_ext = [lo_v[i] + h * np.arange(-p, n[i] + p + 1) for i in range(dim)]
        mesh = np.meshgrid(*axes_ext, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        samples = np.asarray(f(pts), dtype=float).reshape(mesh[0].shape)
        axes = [a[p:-p] for a in axes_ext]
    else:
        if any(s <= 2 * p for s in samples.shape):
            raise ValueError("sample array too small for the mollifier support")
        axes = [h * np.arange(p, s - p) for s in samples.shape]
    crop = tuple(slice(p, -p) for _ in range(dim))

    def conv(orders):
        return _convolve(samples, ker, orders)[crop]

    value = conv([0] * dim)
    grad = np.stack([conv([1 if a == i else 0 for a in range(dim)]) for i in range(dim)])
    hess = np.empty((dim, dim) + value.shape)
    for i in range(dim):
        for j in range(dim):
            orders = [0] * dim
            orders[i] += 1
            orders[j] += 1
            hess[i, j] = conv(orders)
    return MollifiedSamples(axes, value, grad, hess)


# ---------------------------------------------------------------------------
# hat functions and projections


@dataclass(frozen=True)
class LatticeProjection:
    """Hat-function basis on the ``(j+1)^d`` lattice points ``(M/j) k`` of ``[0, M]^d``."""

    M: float
    j: int
    d: int = 1

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be > 0")
        if not 1 <= int(self.j) <= MAX_REFINEMENT:
            raise ValueError(f"j must lie in [1, {MAX_REFINEMENT}]")
        if not 1 <= int(self.d) <= MAX_DIM:
            raise ValueError(f"d must lie in [1, {MAX_DIM}]; the basis has (j+1)^d elements")

    @property
    def lattice(self) -> Lattice:
        return Lattice(np.zeros(self.d), np.full(self.d, float(self.M)), self.j + 1)

    @property
    def width(self) -> float:
        return self.M / self.j

    def hat_matrix(self, points) -> np.ndarray:
        """``H[p, k] = phi_k(x_p)``; dense, shape ``(n_points, (j+1)^d)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nodes = self.lattice.coords
        t = 1.0 - np.abs(pts[:, None, :] - nodes[None, :, :]) / self.width
        return np.prod(np.clip(t, 0.0, None), axis=2)

    def coefficients(self, m) -> np.ndarray:
        """``a_k = (phi_k, m)`` for a GridMeasure or EmpiricalMeasure supported in the box."""
        if isinstance(m, GridMeasure):
            pts, w = m.lattice.coords, np.asarray(m.weights)
            keep = w > 0
            pts, w = pts[keep], w[keep]
        elif isinstance(m, EmpiricalMeasure):
            pts = np.asarray(m.points)
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            raise TypeError("expected GridMeasure or EmpiricalMeasure")
        if pts.shape[1] != self.d:
            raise ValueError("measure dimension does not match the projection")
        tol = 1e-12 * self.M
        if np.any(pts < -tol) or np.any(pts > self.M + tol):
            raise ValueError(f"measure has mass outside [0, {self.M:g}]^{self.d}")
        nodes, weights = self.lattice.cell_weights(np.clip(pts, 0.0, self.M))
        return np.bincount(nodes.ravel(), (weights * w[:, None]).ravel(), minlength=self.lattice.size)


@dataclass(frozen=True, eq=False)
class HatInterpolant:
    """``P_j f = sum_k f(x_k) phi_k``."""

    projection: LatticeProjection
    node_values: np.ndarray

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nodes, weights = self.projection.lattice.cell_weights(np.clip(pts, 0.0, self.projection.M))
        return np.sum(self.node_values[nodes] * weights, axis=1)


def project_function(f: Callable, proj: LatticeProjection) -> HatInterpolant:
    values = np.asarray(f(proj.lattice.coords), dtype=float).reshape(-1)
    return HatInterpolant(proj, values)


def project_measure(m, proj: LatticeProjection) -> GridMeasure:
    """``P_j^* m``: node ``k`` receives ``(phi_k, m)``."""
    return GridMeasure(proj.lattice, proj.coefficients(m))


def _sample_bump(rng, shape):
    t = np.linspace(-1.0, 1.0, 20001)
    cdf = integrate.cumulative_trapezoid(bump(t), t, initial=0.0)
    cdf /= cdf[-1]
    return np.interp(rng.random(shape), cdf, t)


def smooth_functional(F: Callable, proj: LatticeProjection, spec: MollifierSpec, samples: int = 256,
                      seed: int = 0) -> Callable:
    """Evaluator ``mu -> Phi_delta[f_j](a(mu))`` with ``f_j(a) = F(sum_k a_k delta_{x_k})``.

    The mollifier integral over the ``(j+1)^d`` coefficients is a Monte-Carlo
    average over ``samples`` antithetic pairs drawn once from the product
    bump, so the evaluator is deterministic and exact for affine ``f_j``.
    Coefficients pushed below zero by the shift are clipped, which keeps
    ``f_j`` Lipschitz in the l1 norm of ``a``.
    """
    lat = proj.lattice
    rng = np.random.default_rng(seed)
    z = _sample_bump(rng, (samples, lat.size)) * spec.delta
    shifts = np.concatenate([z, -z])

    def evaluate(mu) -> float:
        a = proj.coefficients(mu)
        vals = [F(GridMeasure(lat, np.clip(a - s, 0.0, None))) for s in shifts]
        return float(np.mean(vals))

    return evaluate


# ---------------------------------------------------------------------------
# sampled norms


def lipschitz_norm_estimate(f: Callable, samples: int = 1000, seed: int = 0, lo=0.0, hi=1.0, dim: int = 1,
                            points=None) -> float:
    """Randomised lower estimate of ``sup (f(x) - f(y)) / ||x - y||_1``.

    Pairwise quotients over ``samples`` uniform points (or ``points``), then a
    local refinement around the best pair along the segment joining it.
    """
    if samples < 2:
        raise ValueError("need at least two sample points")
    rng = np.random.default_rng(seed)
    if points is None:
        lo_v = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
        hi_v = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))
        points = lo_v + (hi_v - lo_v) * rng.random((samples, dim))
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(f(pts), dtype=float).reshape(-1)
    best, pair = 0.0, None
    for start in range(0, pts.shape[0], 512):
        blk = slice(start, start + 512)
        dist = np.abs(pts[blk, None, :] - pts[None, :, :]).sum(axis=2)
        diff = np.abs(vals[blk, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dist > 0, diff / dist, 0.0)
        i = np.unravel_index(np.argmax(q), q.shape)
        if q[i] > best:
            best, pair = float(q[i]), (start + i[0], i[1])
    if pair is None:
        return 0.0
    # refine: short chords along the segment between the best pair
    x, y = pts[pair[0]], pts[pair[1]]
    s = np.linspace(0.0, 1.0, 257)
    seg = x[None, :] + s[:, None] * (y - x)[None, :]
    sv = np.asarray(f(seg), dtype=float).reshape(-1)
    step = np.abs(seg[1] - seg[0]).sum()
    if step > 0:
        best = max(best, float(np.abs(np.diff(sv)).max() / step))
    return best


def dirac_blip_distance(x, y) -> float:
    """``||delta_x - delta_y||`` in the dual of the bounded-Lipschitz norm: ``2r / (2 + r)``, ``r = ||x - y||_1``."""
    r = float(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)).sum())
    return 2.0 * r / (2.0 + r)


def functional_lipschitz_estimate(F: Callable, lattice: Lattice, samples: int = 1000, seed: int = 0) -> float:
    """Lower estimate of the Lipschitz constant of ``F`` on probability measures, in the bLip-dual distance.

    Uses pairs of Dirac masses at random lattice nodes, for which the
    distance has the closed form :func:`dirac_blip_distance`.
    """
    rng = np.random.default_rng(seed)
    coords = lattice.coords
    nodes = rng.integers(0, lattice.size, size=(samples, 2))
    cache = {}

    def value(k):
        if k not in cache:
            cache[k] = float(F(GridMeasure.dirac(lattice, int(k))))
        return cache[k]

    best = 0.0
    for a, b in nodes:
        if a == b:
            continue
        best = max(best, abs(value(a) - value(b)) / dirac_blip_distance(coords[a], coords[b]))
    return best


def blip_dual_norm(weights, lattice: Lattice) -> float:
    """``sup { (f, m) : ||f||_sup + ||f||_Lip <= 1 }`` for a signed node-mass vector ``m``.

    Solved as a linear program over the node values of ``f``, a sup bound
    ``s`` and a Lipschitz bound ``L``.  With the l1 distance on a regular grid
    the Lipschitz constraint reduces to axis-neighbour pairs.
    """
    w = np.asarray(weights, dtype=float).reshape(-1)
    n = lattice.size
    if w.size != n:
        raise ValueError("weights do not match the lattice")
    shape = (lattice.nodes_per_axis,) * lattice.dim
    idx = np.arange(n).reshape(shape)
    rows, rhs = [], []
    pairs = []
    for ax in range(lattice.dim):
        a = np.take(idx, range(0, shape[ax] - 1), axis=ax).ravel()
        b = np.take(idx, range(1, shape[ax]), axis=ax).ravel()
        pairs.append((a, b, float(lattice.spacing[ax])))
    from scipy.sparse import coo_matrix, vstack

    def block(r, c, v, nrows):
        return coo_matrix((v, (r, c)), shape=(nrows, n + 2))

    eye = np.arange(n)
    blocks = [
        block(np.r_[eye, eye], np.r_[eye, np.full(n, n)], np.r_[np.ones(n), -np.ones(n)], n),
        block(np.r_[eye, eye], np.r_[eye, np.full(n, n)], np.r_[-np.ones(n), -np.ones(n)], n),
    ]
    for a, b, h in pairs:
        m = a.size
        r = np.arange(m)
        for sgn in (1.0, -1.0):
            blocks.append(block(np.r_[r, r, r], np.r_[a, b, np.full(m, n + 1)],
                                np.r_[sgn * np.ones(m), -sgn * np.ones(m), -h * np.ones(m)], m))
    blocks.append(block(np.array([0, 0]), np.array([n, n + 1]), np.array([1.0, 1.0]), 1))
    A = vstack(blocks).tocsr()
    b_ub = np.zeros(A.shape[0])
    b_ub[-1] = 1.0
    c = np.r_[-w, 0.0, 0.0]
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = optimize.linprog(c, A_ub=A, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"bLip dual LP failed: {res.message}")
    return float(-res.fun)


def regularization_schedule(N: int, d: int = 1):
    """Refinement ``j = N^beta`` and width ``delta = N^-(1 - beta)`` with ``beta = 1/(2 + d)``."""
    beta = 1.0 / (2 + d)
    return max(1, int(round(N ** beta))), float(N ** -(1.0 - beta))


# ---------------------------------------------------------------------------
# bound checks


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def _kink(dim):
    return lambda p: np.abs(np.atleast_2d(p) - 0.5).sum(axis=1)


def _random_lipschitz(rng, dim, terms=6):
    """Random smooth bounded function: a sum of sines with random frequencies."""
    k = rng.normal(0, 6, size=(terms, dim))
    ph = rng.uniform(0, 2 * np.pi, terms)
    a = rng.normal(0, 1, terms) / terms
    return lambda p: np.sin(np.atleast_2d(p) @ k.T + ph) @ a


def _box_points(rng, n, dim, M=1.0):
    return rng.random((n, dim)) * M


def _mollifier_checks(delta, dim, rng):
    spec = MollifierSpec(delta)
    f = _kink(dim)
    lo, hi = (0.0, 1.0) if dim == 1 else (0.45, 0.55)
    ms = mollify(f, spec, spec.max_step, lo, hi, dim)
    pts = ms.points()
    lip = lipschitz_norm_estimate(f, 1000, int(rng.integers(2 ** 31)), 0.0, 1.0, dim)
    sup_err = float(np.abs(ms.value.ravel() - f(pts)).max())
    out = [BoundCheck(f"mollifier_sup[d={dim},delta={delta:g}]", sup_err,
                      dim * delta * lip * spec.first_moment)]
    pad = lo - delta, hi + delta
    sup_f = float(np.abs(f(pts)).max())
    ext = np.array([[pad[0]] * dim, [pad[1]] * dim])
    sup_f = max(sup_f, float(np.abs(f(ext)).max()))
    blip = sup_f + lip
    out.append(BoundCheck(f"c2_bound[d={dim},delta={delta:g}]", ms.c2_norm(),
                          blip * (1.0 + spec.derivative_l1 / delta)))
    return out


def _projection_checks(j, dim, rng, n_funcs=3):
    proj = LatticeProjection(1.0, j, dim)
    out = []
    lhs_i = lhs_ii = lhs_iii = -np.inf
    rhs_i = rhs_ii = rhs_iii = np.inf
    for _ in range(n_funcs):
        f = _random_lipschitz(rng, dim)
        Pf = project_function(f, proj)
        pts = _box_points(rng, 4000, dim)
        fv, pv = f(pts), Pf(pts)
        lip = lipschitz_norm_estimate(f, 1000, int(rng.integers(2 ** 31)), 0.0, 1.0, dim)
        lip_p = lipschitz_norm_estimate(Pf, 1000, int(rng.integers(2 ** 31)), 0.0, 1.0, dim)
        # the tightest instance of each inequality is reported
        if np.abs(pv).max() - np.abs(fv).max() > lhs_i - rhs_i:
            lhs_i, rhs_i = float(np.abs(pv).max()), float(np.abs(fv).max())
        c_ii = 2 ** dim * dim * proj.width * lip
        if np.abs(pv - fv).max() - c_ii > lhs_ii - rhs_ii:
            lhs_ii, rhs_ii = float(np.abs(pv - fv).max()), c_ii
        c_iii = 2 ** (dim + 1) * dim * lip
        if lip_p - c_iii > lhs_iii - rhs_iii:
            lhs_iii, rhs_iii = lip_p, c_iii
    tag = f"[d={dim},j={j}]"
    out += [BoundCheck("interp_sup" + tag, lhs_i, rhs_i),
            BoundCheck("interp_error" + tag, lhs_ii, rhs_ii),
            BoundCheck("interp_lipschitz" + tag, lhs_iii, rhs_iii)]
    return out


def _measure_checks(j, dim, rng):
    proj = LatticeProjection(1.0, j, dim)
    refine = 8 if dim == 1 else 2
    fine = Lattice(np.zeros(dim), np.ones(dim), j * refine + 1)
    # coarse nodes sit on fine nodes, so both projections live on one lattice
    coarse_to_fine = fine.nearest_node(proj.lattice.coords)

    def on_fine(gm):
        w = np.zeros(fine.size)
        np.add.at(w, coarse_to_fine, gm.weights)
        return w

    def random_measure():
        return GridMeasure(fine, rng.dirichlet(np.full(fine.size, 0.3)))

    tag = f"[d={dim},j={j}]"
    mu1, mu2 = random_measure(), random_measure()
    lhs = float(np.abs(project_measure(mu1, proj).weights - project_measure(mu2, proj).weights).sum())
    rhs = 2 ** (dim + 1) * dim * float(np.abs(mu1.weights - mu2.weights).sum())
    out = [BoundCheck("measure_projection_tv" + tag, lhs, rhs)]
    lhs_b = blip_dual_norm(on_fine(project_measure(mu1, proj)) - on_fine(project_measure(mu2, proj)), fine)
    rhs_b = 2 ** (dim + 1) * dim * blip_dual_norm(mu1.weights - mu2.weights, fine)
    out.append(BoundCheck("measure_projection_blip" + tag, lhs_b, rhs_b))

    g = _random_lipschitz(rng, dim)
    gv = g(fine.coords)

    def F(m):
        return float(np.sin(3.0 * (m.weights @ gv)))

    def F_j(m):
        return F(GridMeasure(fine, on_fine(project_measure(m, proj))))

    lip_F = functional_lipschitz_estimate(F, fine, 1000, int(rng.integers(2 ** 31)))
    lip_Fj = functional_lipschitz_estimate(F_j, fine, 1000, int(rng.integers(2 ** 31)))
    out.append(BoundCheck("projected_functional_lipschitz" + tag, lip_Fj, 2 ** (dim + 1) * dim * lip_F))
    worst_iii = worst_iv = 0.0
    for _ in range(3):
        mu = random_measure()
        worst_iii = max(worst_iii, blip_dual_norm(on_fine(project_measure(mu, proj)) - mu.weights, fine))
        worst_iv = max(worst_iv, abs(F_j(mu) - F(mu)))
    out.append(BoundCheck("measure_projection_error" + tag, worst_iii, 2 ** dim * dim * proj.width))
    out.append(BoundCheck("projected_functional_error" + tag, worst_iv, 2 ** dim * dim * proj.width * lip_F))
    return out


def approximation_bound_checks(js=(4, 8, 16), deltas=(0.1, 0.05, 0.01), dims=(1, 2), seed: int = 0) -> list:
    """Every mollifier and projection inequality over the requested grid of settings."""
    rng = np.random.default_rng(seed)
    rows = []
    for d in dims:
        for delta in deltas:
            rows += _mollifier_checks(delta, d, rng)
        for j in js:
            rows += _projection_checks(j, d, rng)
            rows += _measure_checks(j, d, rng)
    return rows


def bound_report_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["bound_name", "lhs", "rhs", "margin"])
    for r in rows:
        wr.writerow([r.name, repr(float(r.lhs)), repr(float(r.rhs)), repr(float(r.margin))])
    return buf.getvalue()
