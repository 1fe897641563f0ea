"""Exact simulation of the N-player jump system, the limit player and the tagged-deviator system.

Uniformisation: every player carries a Poisson clock of rate
``lambda_max = base_rate + control_gain * u_max``.  At a candidate time the
player jumps with probability ``lambda(gamma(t, x)) / lambda_max`` to a node
drawn by inverse CDF from the destination law evaluated at the current
coupling measure (the empirical measure, or the frozen curve for the limit
player).  Players live on lattice nodes, so the N-player chain has the lattice
kinetic equation as its mean-field limit.

Randomness is counter based: player ``i`` of replica ``r`` owns the Philox
stream with key ``(seed, r)`` and counter offset ``i``; the initial positions of
replica ``r`` come from a separate stream of the same key.  Results therefore
do not depend on how replicas are distributed over workers, and runs that
differ only in the tagged player's policy see identical random inputs.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from numba import njit

from .measures import EmpiricalMeasure, GridMeasure, Lattice, MeasureCurve
from .model import ControlSet, CostSpec, FeedbackControl, JumpKernelSpec

__all__ = [
    "SimConfig",
    "PathRecord",
    "replica_randoms",
    "initial_nodes",
    "simulate_nplayer",
    "simulate_limit_player",
    "simulate_tagged",
    "simulate_tagged_arms",
    "payoff_estimate",
    "paths_csv",
    "payoffs_csv",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    N: int = 100
    reps: int = 200
    seed: int = 0
    record_dt: float = 0.1
    stratified: bool = False

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("simulation.N: must be >= 1")
        if int(self.reps) < 1:
            raise ValueError("simulation.reps: must be >= 1")
        if not self.record_dt > 0:
            raise ValueError("simulation.record_dt: must be > 0")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("simulation.seed: must be a 64-bit unsigned integer")


@dataclass(eq=False)
class PathRecord:
    """One replica.  ``states[k, i]`` is the node of player ``i`` at ``times[k]``."""

    rep: int
    lattice: Lattice
    times: np.ndarray
    states: np.ndarray
    running: np.ndarray
    terminal: np.ndarray
    jumps: np.ndarray
    event_times: np.ndarray | None = None
    event_players: np.ndarray | None = None

    @property
    def payoff(self) -> np.ndarray:
        return self.running + self.terminal

    def empirical(self, k: int = -1) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.lattice.coords[self.states[k]])

    def grid_measure(self, k: int = -1) -> GridMeasure:
        """Empirical measure at snapshot ``k`` as node masses (players sit on nodes)."""
        w = np.bincount(self.states[k], minlength=self.lattice.size) / self.states.shape[1]
        return GridMeasure(self.lattice, w)


# ---------------------------------------------------------------------------
# random inputs


def _stream(seed: int, rep: int, word2: int, word3: int = 0) -> np.random.Generator:
    key = (int(seed) & _MASK64) | ((int(rep) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, word2, word3]))


def replica_randoms(seed: int, rep: int, N: int, lam_max: float, T: float):
    """Candidate events of all players in ``[0, T)``, merged in time order.

    Returns ``(times, players, u_accept, u_dest)``.
    """
    if lam_max <= 0 or T <= 0:
        e = np.empty(0)
        return e, np.empty(0, dtype=np.int64), e, e
    mean = lam_max * T
    chunk = int(mean + 6.0 * np.sqrt(mean) + 10)
    ts, ps, uas, uds = [], [], [], []
    for i in range(N):
        g = _stream(seed, rep, i)
        clock = 0.0
        while True:
            gaps = g.standard_exponential(chunk) / lam_max
            ua = g.random(chunk)
            ud = g.random(chunk)
            t = clock + np.cumsum(gaps)
            keep = t < T
            ts.append(t[keep])
            uas.append(ua[keep])
            uds.append(ud[keep])
            ps.append(np.full(int(keep.sum()), i, dtype=np.int64))
            if not keep[-1]:
                break
            clock = t[-1]
    t = np.concatenate(ts)
    order = np.argsort(t, kind="stable")
    return t[order], np.concatenate(ps)[order], np.concatenate(uas)[order], np.concatenate(uds)[order]


def initial_nodes(seed: int, rep: int, N: int, mu0: GridMeasure, stratified: bool = False,
                  first_node: int | None = None) -> np.ndarray:
    """Initial lattice nodes drawn from ``mu0`` by inverse CDF.

    With ``stratified`` the ``m`` sampled players use the points
    ``(i + U_i) / m``.  ``first_node`` pins player 0; the others are then
    sampled with ``m = N - 1``.
    """
    g = _stream(seed, rep, 0, 1)
    m = N if first_node is None else N - 1
    u = g.random(m)
    if stratified:
        u = (np.arange(m) + u) / m
    cdf = np.cumsum(mu0.weights)
    cdf /= cdf[-1]
    nodes = np.minimum(np.searchsorted(cdf, u, side="right"), mu0.lattice.size - 1).astype(np.int64)
    if first_node is not None:
        nodes = np.concatenate([[int(first_node)], nodes]).astype(np.int64)
    return nodes


# ---------------------------------------------------------------------------
# event loop


@njit(cache=True)
def _sample_destination(x, qw, centre, sigma, u):
    n = x.shape[0]
    emax = -np.inf
    for j in range(n):
        z = (x[j] - centre) / sigma
        e = -0.5 * z * z
        if e > emax:
            emax = e
    total = 0.0
    for j in range(n):
        z = (x[j] - centre) / sigma
        total += qw[j] * np.exp(-0.5 * z * z - emax)
    target = u * total
    acc = 0.0
    for j in range(n):
        z = (x[j] - centre) / sigma
        acc += qw[j] * np.exp(-0.5 * z * z - emax)
        if acc > target:
            return j
    return n - 1


@njit(cache=True)
def _run_events(x, qw, lam0, lam1, kappa, sigma, lam_max,
                beta, beta_T, times, pol_o, pol_t, gc_o, gr_o, gc_t, gr_t,
                mode, cell_mean, m1_cum, m2_cum,
                init, cand_t, cand_p, cand_c, ua, ud, snap_t, T, record_events):
    N = init.shape[0]
    K = times.shape[0] - 1
    nodes = init.copy()
    n_snap = snap_t.shape[0]
    snaps = np.empty((n_snap, N), dtype=np.int64)
    running = np.zeros(N)
    terminal = np.zeros(N)
    jumps = np.zeros(N, dtype=np.int64)
    n_ev = cand_t.shape[0] if record_events else 0
    ev_t = np.empty(n_ev)
    ev_p = np.empty(n_ev, dtype=np.int64)
    n_acc = 0

    last_t = np.zeros(N)
    last_c = np.zeros(N, dtype=np.int64)
    last_m1 = np.zeros(N)
    last_m2 = np.zeros(N)
    sum_x = 0.0
    for i in range(N):
        sum_x += x[nodes[i]]
    m1g = 0.0
    m2g = 0.0
    tg = 0.0
    si = 0

    for e in range(cand_t.shape[0]):
        t = cand_t[e]
        while si < n_snap and snap_t[si] < t:
            snaps[si, :] = nodes
            si += 1
        i = cand_p[e]
        c = cand_c[e]
        xi = nodes[i]
        if i == 0:
            u = pol_t[c, xi]
        else:
            u = pol_o[c, xi]
        if ua[e] * lam_max >= lam0 + lam1 * u:
            continue
        if mode == 0:
            m = sum_x / N
            m1g += m * (t - tg)
            m2g += m * m * (t - tg)
            tg = t
            m1 = m1g
            m2 = m2g
        else:
            m = cell_mean[c]
            m1 = m1_cum[c] + (t - times[c]) * m
            m2 = m2_cum[c] + (t - times[c]) * m * m
        # settle player i's payoff over [last_t, t] at its current node
        if i == 0:
            ctrl = (gc_t[c, xi] + (t - times[c]) * gr_t[c, xi]
                    - gc_t[last_c[i], xi] - (last_t[i] - times[last_c[i]]) * gr_t[last_c[i], xi])
        else:
            ctrl = (gc_o[c, xi] + (t - times[c]) * gr_o[c, xi]
                    - gc_o[last_c[i], xi] - (last_t[i] - times[last_c[i]]) * gr_o[last_c[i], xi])
        xv = x[xi]
        cong = beta * (xv * xv * (t - last_t[i]) - 2.0 * xv * (m1 - last_m1[i]) + (m2 - last_m2[i]))
        running[i] += ctrl - cong
        last_t[i] = t
        last_c[i] = c
        last_m1[i] = m1
        last_m2[i] = m2
        centre = (1.0 - kappa) * xv + kappa * m
        y = _sample_destination(x, qw, centre, sigma, ud[e])
        sum_x += x[y] - xv
        nodes[i] = y
        jumps[i] += 1
        if record_events:
            ev_t[n_acc] = t
            ev_p[n_acc] = i
        n_acc += 1

    while si < n_snap:
        snaps[si, :] = nodes
        si += 1
    c = K - 1
    if mode == 0:
        m = sum_x / N
        m1g += m * (T - tg)
        m2g += m * m * (T - tg)
        m1 = m1g
        m2 = m2g
        mT = m
    else:
        m1 = m1_cum[K]
        m2 = m2_cum[K]
        mT = cell_mean[K]
    for i in range(N):
        xi = nodes[i]
        if i == 0:
            ctrl = gc_t[K, xi] - gc_t[last_c[i], xi] - (last_t[i] - times[last_c[i]]) * gr_t[last_c[i], xi]
        else:
            ctrl = gc_o[K, xi] - gc_o[last_c[i], xi] - (last_t[i] - times[last_c[i]]) * gr_o[last_c[i], xi]
        xv = x[xi]
        cong = beta * (xv * xv * (T - last_t[i]) - 2.0 * xv * (m1 - last_m1[i]) + (m2 - last_m2[i]))
        running[i] += ctrl - cong
        d = xv - mT
        terminal[i] = -beta_T * d * d
    if not record_events:
        n_acc = 0
    return snaps, running, terminal, jumps, ev_t[:n_acc], ev_p[:n_acc]


# ---------------------------------------------------------------------------
# shared setup


def _control_tables(policy: FeedbackControl, lattice: Lattice, costs: CostSpec):
    """Cumulative time integral of the control part ``u (a - s x) - c_u u^2 / 2`` per node."""
    x = lattice.x
    u = policy.values
    rate = u * (costs.reward_slope - costs.state_coupling * x[None, :]) - 0.5 * costs.control_curvature * u * u
    dt = np.diff(policy.times)
    cum = np.zeros_like(u)
    cum[1:] = np.cumsum(rate[:-1] * dt[:, None], axis=0)
    return np.ascontiguousarray(cum), np.ascontiguousarray(rate)


def _curve_tables(curve: MeasureCurve | None, times: np.ndarray):
    if curve is None:
        z = np.zeros(times.size)
        return z, z, z
    idx = np.clip(np.searchsorted(curve.times, times + 1e-12, side="right") - 1, 0, len(curve) - 1)
    means = curve.means()[idx, 0]
    dt = np.diff(times)
    m1 = np.zeros(times.size)
    m2 = np.zeros(times.size)
    m1[1:] = np.cumsum(means[:-1] * dt)
    m2[1:] = np.cumsum(means[:-1] ** 2 * dt)
    return means, m1, m2


@dataclass
class _Problem:
    lattice: Lattice
    kernel: JumpKernelSpec
    costs: CostSpec
    lam_max: float
    T: float
    times: np.ndarray
    snap_t: np.ndarray
    mode: int
    cell_mean: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    policy_o: tuple
    policies_t: list


def _snapshot_times(T, record_dt):
    n = int(np.floor(T / record_dt + 1e-9))
    t = np.arange(n + 1) * record_dt
    if t[-1] < T - 1e-12:
        t = np.append(t, T)
    return t


def _prepare(kernel, costs, controls, lattice, policy, tagged_policies, T, record_dt, curve=None):
    if lattice.dim != 1:
        raise NotImplementedError("the simulator supports one-dimensional state boxes")
    pols = [policy] + list(tagged_policies)
    for p in pols:
        if p.n_nodes != lattice.size:
            raise ValueError("policy does not match the lattice")
        if not np.array_equal(p.times, policy.times):
            raise ValueError("all policies must share one time grid")
        if not p.within(controls):
            raise ValueError("policy values outside the control set")
    if policy.times[0] > 0 or policy.times[-1] < T - 1e-12:
        raise ValueError("policy time grid must cover [0, T]")
    times = np.ascontiguousarray(policy.times, dtype=float)
    cell_mean, m1, m2 = _curve_tables(curve, times)
    tab_o = _control_tables(policy, lattice, costs)
    tabs_t = [(np.ascontiguousarray(p.values), *_control_tables(p, lattice, costs)) for p in tagged_policies]
    return _Problem(lattice, kernel, costs, kernel.max_rate(controls), float(T), times,
                    _snapshot_times(T, record_dt), 0 if curve is None else 1, cell_mean, m1, m2,
                    (np.ascontiguousarray(policy.values), *tab_o), tabs_t)


def _run_arms(prob: _Problem, seed: int, rep: int, N: int, init: np.ndarray, record_events: bool):
    cand_t, cand_p, ua, ud = replica_randoms(seed, rep, N, prob.lam_max, prob.T)
    times = prob.times
    cand_c = np.clip(np.searchsorted(times, cand_t, side="right") - 1, 0, times.size - 2).astype(np.int64)
    lat, k, c = prob.lattice, prob.kernel, prob.costs
    x = np.ascontiguousarray(lat.x)
    qw = np.ascontiguousarray(lat.quadrature_weights)
    pol_o, gc_o, gr_o = prob.policy_o
    out = []
    for pol_t, gc_t, gr_t in prob.policies_t:
        snaps, running, terminal, jumps, ev_t, ev_p = _run_events(
            x, qw, k.base_rate, k.control_gain, k.mean_pull, k.jump_sigma, prob.lam_max,
            c.congestion_weight, c.terminal_weight, times, pol_o, pol_t, gc_o, gr_o, gc_t, gr_t,
            prob.mode, prob.cell_mean, prob.m1, prob.m2,
            init, cand_t, cand_p, cand_c, ua, ud, prob.snap_t, prob.T, record_events)
        out.append(PathRecord(rep, lat, prob.snap_t, snaps, running, terminal, jumps,
                              ev_t if record_events else None, ev_p if record_events else None))
    return out


def _chunk_runner(prob, seed, reps, N, init_fn, record_events):
    return [_run_arms(prob, seed, r, N, init_fn(r), record_events) for r in reps]


def _dispatch(prob, cfg: SimConfig, N, init_fn, workers: int, record_events: bool):
    reps = list(range(cfg.reps))
    if workers is None or workers <= 1 or cfg.reps < 2:
        per_rep = _chunk_runner(prob, cfg.seed, reps, N, init_fn, record_events)
    else:
        chunks = [reps[i::workers] for i in range(workers)]
        parts = Parallel(n_jobs=workers)(
            delayed(_chunk_runner)(prob, cfg.seed, ch, N, init_fn, record_events) for ch in chunks if ch)
        by_rep = {}
        for ch, part in zip([c for c in chunks if c], parts):
            for r, rec in zip(ch, part):
                by_rep[r] = rec
        per_rep = [by_rep[r] for r in reps]
    # transpose to one list of records per arm
    return [list(arm) for arm in zip(*per_rep)]


class _InitSampler:
    def __init__(self, seed, N, mu0, stratified, first_node=None, fixed=None):
        self.seed, self.N, self.mu0 = seed, N, mu0
        self.stratified, self.first_node, self.fixed = stratified, first_node, fixed

    def __call__(self, rep):
        if self.fixed is not None:
            return np.ascontiguousarray(self.fixed, dtype=np.int64)
        return initial_nodes(self.seed, rep, self.N, self.mu0, self.stratified, self.first_node)


# ---------------------------------------------------------------------------
# public simulators


def simulate_nplayer(kernel: JumpKernelSpec, policy: FeedbackControl, cfg: SimConfig, T: float,
                     mu0: GridMeasure, costs: CostSpec, controls: ControlSet, workers: int = 1,
                     init: np.ndarray | None = None, record_events: bool = False) -> list:
    """N exchangeable players, all using ``policy``, coupled through their empirical measure."""
    prob = _prepare(kernel, costs, controls, mu0.lattice, policy, [policy], T, cfg.record_dt)
    sampler = _InitSampler(cfg.seed, cfg.N, mu0, cfg.stratified, fixed=init)
    return _dispatch(prob, cfg, cfg.N, sampler, workers, record_events)[0]


def simulate_limit_player(kernel: JumpKernelSpec, curve: MeasureCurve, policy: FeedbackControl,
                          cfg: SimConfig, T: float, x0, costs: CostSpec, controls: ControlSet,
                          workers: int = 1, record_events: bool = False) -> list:
    """``cfg.N`` independent players started at ``x0`` and driven by the frozen curve."""
    lat = curve.lattice
    node = int(lat.nearest_node([[float(x0)]])[0])
    prob = _prepare(kernel, costs, controls, lat, policy, [policy], T, cfg.record_dt, curve=curve)
    sampler = _InitSampler(cfg.seed, cfg.N, None, False, fixed=np.full(cfg.N, node))
    return _dispatch(prob, cfg, cfg.N, sampler, workers, record_events)[0]


def simulate_tagged(kernel: JumpKernelSpec, gamma: FeedbackControl, gamma_tilde: FeedbackControl,
                    cfg: SimConfig, T: float, mu0: GridMeasure, x0_first=None, costs: CostSpec = None,
                    controls: ControlSet = None, workers: int = 1, record_events: bool = False) -> list:
    """Player 0 uses ``gamma_tilde`` (and starts at ``x0_first`` if given); the rest use ``gamma``."""
    return simulate_tagged_arms(kernel, gamma, [gamma_tilde], cfg, T, mu0, x0_first, costs, controls,
                                workers, record_events)[0]


def simulate_tagged_arms(kernel: JumpKernelSpec, gamma: FeedbackControl, tagged: list,
                         cfg: SimConfig, T: float, mu0: GridMeasure, x0_first=None,
                         costs: CostSpec = None, controls: ControlSet = None, workers: int = 1,
                         record_events: bool = False) -> list:
    """One list of records per tagged policy, all arms driven by the same random inputs."""
    if costs is None or controls is None:
        raise ValueError("costs and controls are required")
    lat = mu0.lattice
    first = None if x0_first is None else int(lat.nearest_node([[float(x0_first)]])[0])
    prob = _prepare(kernel, costs, controls, lat, gamma, tagged, T, cfg.record_dt)
    sampler = _InitSampler(cfg.seed, cfg.N, mu0, cfg.stratified, first_node=first)
    return _dispatch(prob, cfg, cfg.N, sampler, workers, record_events)


def payoff_estimate(records: list, player: int | None = 0):
    """Sample mean and standard error of the terminal-inclusive payoff.

    ``player=None`` averages over all players within each replica first.
    """
    if len(records) < 2:
        raise ValueError("at least two records are needed")
    if player is None:
        vals = np.array([r.payoff.mean() for r in records])
    else:
        vals = np.array([r.payoff[player] for r in records])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))


def paths_csv(records: list) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["rep", "time", "player", "state"])
    for r in records:
        x = r.lattice.x
        for t, row in zip(r.times, r.states):
            for i, node in enumerate(row):
                wr.writerow([r.rep, repr(float(t)), i, repr(float(x[node]))])
    return buf.getvalue()


def payoffs_csv(records: list, player: int = 0) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["rep", "payoff"])
    for r in records:
        wr.writerow([r.rep, repr(float(r.payoff[player]))])
    return buf.getvalue()
