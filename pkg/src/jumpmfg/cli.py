"""Command-line front end: ``jumpmfg <command> [scenario] [options]``.

Exit status: 0 success, 1 a checked bound failed, 2 invalid scenario or
arguments, 3 the fixed-point iteration did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, load_scenario

log = logging.getLogger("jumpmfg")

EXIT_OK, EXIT_BOUND, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3
COMMANDS = ("hypcheck", "kinetic", "hjb", "equilibrium", "simulate", "functional-gap", "nash-gap",
            "mollify-check")


def _versions() -> dict:
    import numba
    import scipy
    import sklearn

    from . import __version__
    return {"jumpmfg": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "scikit-learn": sklearn.__version__}


def _int_list(text: str) -> tuple:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("N values must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jumpmfg", description="Pure-jump mean-field game solver and checks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("scenario", nargs="?", help="scenario file or bundled name (default, decoupled)")
    p.add_argument("--config", help="scenario file or bundled name; overrides the positional argument")
    p.add_argument("--seed", type=int, help="root seed (simulation.seed)")
    p.add_argument("--workers", type=int, help="parallel workers (default: $JUMPMFG_WORKERS or simulation.workers)")
    p.add_argument("--out-dir", default="out", help="directory for CSV outputs and manifest.json")
    p.add_argument("--N", type=_int_list, help="player counts, comma separated")
    p.add_argument("--reps", type=int, help="replicas per player count")
    p.add_argument("--control", type=float, help="constant control for kinetic/hjb (default: mid control set)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one scenario setting; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _write(out: Path, name: str, text: str, written: list):
    path = out / name
    path.write_text(text)
    written.append(name)


def _equilibrium(sc):
    from .mfg import solve_equilibrium
    return solve_equilibrium(sc)


def _constant_policy(sc, u):
    from .model import FeedbackControl
    U = sc.controls
    u = 0.5 * (U.u_min + U.u_max) if u is None else u
    if not U.contains(u):
        raise ConfigError(f"--control {u:g}: outside [{U.u_min:g}, {U.u_max:g}]")
    return FeedbackControl.constant(u, sc.time_grid(), sc.lattice.size)


def _cmd_hypcheck(sc, args, out, written):
    from .model import hypothesis_probe
    rep = hypothesis_probe(sc.kernel, sc.costs, sc.controls, sc.lattice, seed=sc.values["simulation"]["seed"])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["quantity", "value"])
    for name in ("lambda_max", "lip_x", "lip_mu", "lip_u", "uu_curvature", "gronwall_constant"):
        wr.writerow([name, repr(float(getattr(rep, name)))])
    for name, ok in rep.checks.items():
        wr.writerow([f"check:{name}", int(bool(ok))])
    _write(out, "hypothesis.csv", buf.getvalue(), written)
    return (EXIT_OK if rep.passed else EXIT_BOUND), {"passed": rep.passed}


def _cmd_kinetic(sc, args, out, written):
    from .kinetic import solve_kinetic
    curve, diag = solve_kinetic(sc.initial_measure(), _constant_policy(sc, args.control), sc.kernel,
                                sc.kinetic_config(), sc.horizon, controls=sc.controls, return_diagnostics=True)
    _write(out, "curve.csv", curve.to_csv(), written)
    return EXIT_OK, diag


def _cmd_hjb(sc, args, out, written):
    from .hjb import solve_hjb
    from .kinetic import solve_kinetic
    curve = solve_kinetic(sc.initial_measure(), _constant_policy(sc, args.control), sc.kernel,
                          sc.kinetic_config(), sc.horizon, controls=sc.controls)
    vg = solve_hjb(curve, sc.costs, sc.kernel, sc.controls)
    _write(out, "value.csv", vg.to_csv(), written)
    return EXIT_OK, {}


def _cmd_equilibrium(sc, args, out, written):
    sol = _equilibrium(sc)
    _write(out, "curve.csv", sol.curve.to_csv(), written)
    _write(out, "value.csv", sol.value.to_csv(), written)
    _write(out, "history.csv", sol.history_csv(), written)
    info = {"converged": sol.converged, "iterations": sol.iterations, "residual": sol.residual}
    if not sol.converged:
        print(f"fixed point not converged: residual {sol.residual:.3e} after {sol.iterations} iterations "
              f"(tol {sc.fixed_point.tol:.1e})", file=sys.stderr)
        return EXIT_NONCONVERGED, info
    return EXIT_OK, info


def _cmd_simulate(sc, args, out, written):
    from .particle import paths_csv, payoff_estimate, payoffs_csv, simulate_nplayer
    sol = _equilibrium(sc)
    N = args.N[0] if args.N else sc.values["simulation"]["N"]
    cfg = sc.sim_config(N=N, **({"reps": args.reps} if args.reps else {}))
    recs = simulate_nplayer(sc.kernel, sol.policy, cfg, sc.horizon, sc.initial_measure(), sc.costs, sc.controls,
                            workers=args.workers)
    _write(out, "paths.csv", paths_csv(recs), written)
    _write(out, "payoffs.csv", payoffs_csv(recs), written)
    info = {"N": N, "reps": cfg.reps}
    if cfg.reps >= 2:
        info["payoff_mean"], info["payoff_se"] = payoff_estimate(recs)
    return (EXIT_OK if sol.converged else EXIT_NONCONVERGED), info


def _cmd_functional_gap(sc, args, out, written):
    from .convergence import centred_quadratic, functional_gap_adaptive, rate_fit, results_csv
    from .kinetic import solve_kinetic
    sol = _equilibrium(sc)
    ex = sc.experiments
    Ns = args.N or ex["functional_N"]
    flow = solve_kinetic(sc.initial_measure(), sol.policy, sc.kernel, sc.kinetic_config(), sc.horizon,
                         controls=sc.controls)
    F = centred_quadratic(flow)
    seed = sc.values["simulation"]["seed"]
    pts = []
    for N in Ns:
        g, se, _ = functional_gap_adaptive(F, N, sc, sol.policy, seed=seed, reps0=args.reps or ex["functional_reps"],
                                           max_reps=ex["functional_max_reps"], se_ratio=ex["functional_se_ratio"],
                                           workers=args.workers)
        pts.append((N, g, se))
    slope, lo, hi = _fit_or_nan(pts, ex["bootstrap"], seed)
    rows = [("functional_gap", n, g, se, slope, lo, hi) for n, g, se in pts]
    _write(out, "results.csv", results_csv(rows), written)
    return (EXIT_OK if sol.converged else EXIT_NONCONVERGED), {"slope": slope, "ci": [lo, hi]}


def _fit_or_nan(pts, n_boot, seed):
    from .convergence import rate_fit
    try:
        fit = rate_fit(pts, n_boot=n_boot, seed=seed)
    except ValueError as exc:
        log.warning("rate fit unavailable: %s", exc)
        return float("nan"), float("nan"), float("nan")
    return fit.slope, fit.ci[0], fit.ci[1]


def _cmd_nash_gap(sc, args, out, written):
    from .convergence import default_deviations, nash_gap, results_csv
    sol = _equilibrium(sc)
    ex = sc.experiments
    Ns = args.N or ex["nash_N"]
    seed = sc.values["simulation"]["seed"]
    devs = default_deviations(sol, sc.controls, ex["deviation_constants"], ex["deviation_shift"])
    pts = []
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["N", "deviation", "gain", "se"])
    for N in Ns:
        est = nash_gap(N, args.reps or ex["nash_reps"], sc, sol, devs, seed=seed, workers=args.workers)
        pts.append((N, est.gap, est.se))
        for i, (d, s) in enumerate(zip(est.differences, est.std_errors)):
            wr.writerow([N, i, repr(float(d)), repr(float(s))])
    slope, lo, hi = _fit_or_nan(pts, ex["bootstrap"], seed)
    rows = [("nash_gap", n, g, se, slope, lo, hi) for n, g, se in pts]
    _write(out, "results.csv", results_csv(rows), written)
    _write(out, "deviations.csv", buf.getvalue(), written)
    return (EXIT_OK if sol.converged else EXIT_NONCONVERGED), {"slope": slope, "ci": [lo, hi]}


def _cmd_mollify_check(sc, args, out, written):
    from .mollify import approximation_bound_checks, bound_report_csv
    rows = approximation_bound_checks(seed=sc.values["simulation"]["seed"])
    _write(out, "bounds.csv", bound_report_csv(rows), written)
    failed = [r.name for r in rows if not r.holds]
    return (EXIT_BOUND if failed else EXIT_OK), {"failed": failed}


_HANDLERS = {
    "hypcheck": _cmd_hypcheck,
    "kinetic": _cmd_kinetic,
    "hjb": _cmd_hjb,
    "equilibrium": _cmd_equilibrium,
    "simulate": _cmd_simulate,
    "functional-gap": _cmd_functional_gap,
    "nash-gap": _cmd_nash_gap,
    "mollify-check": _cmd_mollify_check,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(args.config or args.scenario or "default")
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"simulation.seed={args.seed}")
        workers = args.workers or int(os.environ.get("JUMPMFG_WORKERS", "0")) or None
        if workers is not None:
            overrides.append(f"simulation.workers={workers}")
        if args.reps is not None and args.reps < 2:
            raise ConfigError("--reps: must be >= 2")
        sc = sc.with_overrides(overrides)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.workers = sc.workers
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    t0 = time.perf_counter()
    try:
        status, info = _HANDLERS[args.command](sc, args, out, written)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {
        "command": args.command,
        "scenario": sc.name,
        "config_hash": sc.hash,
        "seed": sc.values["simulation"]["seed"],
        "workers": sc.workers,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "versions": _versions(),
        "outputs": written,
        "exit_status": status,
        "result": info,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    (out / "scenario.cfg").write_text(sc.to_ini())
    return status


if __name__ == "__main__":
    sys.exit(main())
