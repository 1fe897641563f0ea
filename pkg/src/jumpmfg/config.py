"""Scenario files: INI sections mapped onto the solver and simulator settings.

Every key has a default whose type fixes how the key is parsed.  The
canonical text (sections and keys in schema order, floats via ``repr``)
round-trips losslessly and is what the scenario hash is computed from.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .kinetic import KineticSolveConfig
from .measures import GridMeasure, Lattice
from .mfg import FixedPointConfig
from .model import ControlSet, CostSpec, JumpKernelSpec
from .particle import SimConfig

__all__ = ["ConfigError", "ScenarioConfig", "SCHEMA", "load_scenario", "bundled_scenarios"]


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending ``section.key``."""


SCHEMA = {
    "scenario": {"name": "default"},
    "domain": {"min": 0.0, "max": 1.0, "nodes": 101},
    "time": {"horizon": 1.0, "steps": 200},
    "kernel": {"base_rate": 1.0, "control_gain": 2.0, "mean_pull": 0.5, "jump_sigma": 0.1},
    "costs": {"reward_slope": 0.5, "control_curvature": 1.0, "congestion_weight": 1.0,
              "terminal_weight": 1.0, "state_coupling": 1.0},
    "controls": {"u_min": 0.0, "u_max": 1.0, "resolution": 101},
    "initial": {"kind": "gaussian", "mean": 0.3, "std": 0.1},
    "kinetic": {"integrator": "rk4", "clip_negatives": True},
    "fixed_point": {"damping": 0.5, "max_iters": 50, "tol": 1e-6, "adapt_damping": True},
    "simulation": {"N": 100, "reps": 200, "seed": 0, "record_dt": 0.1, "stratified": False, "workers": 1},
    "experiments": {
        "functional_N": (20, 40, 80, 160, 320),
        "functional_reps": 200,
        "functional_max_reps": 20000,
        "functional_se_ratio": 0.2,
        "nash_N": (10, 20, 40, 80),
        "nash_reps": 4000,
        "deviation_constants": 5,
        "deviation_shift": 0.1,
        "bootstrap": 1000,
        "limit_reps": 2000,
        "x0": 0.3,
    },
}

_INITIAL_KINDS = ("gaussian", "uniform", "point")


def _parse(section: str, key: str, default, text: str):
    text = text.strip()
    where = f"{section}.{key}"
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {type(default).__name__}") from None


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(int(x)) for x in v)
    return str(v)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario; ``values[section][key]`` holds typed settings."""

    values: dict

    def __post_init__(self):
        full = {s: dict(keys) for s, keys in SCHEMA.items()}
        for s, keys in self.values.items():
            if s not in SCHEMA:
                raise ConfigError(f"{s}: unknown section")
            for key, v in keys.items():
                if key not in SCHEMA[s]:
                    raise ConfigError(f"{s}.{key}: unknown key")
                d = SCHEMA[s][key]
                full[s][key] = _parse(s, key, d, v) if isinstance(v, str) and not isinstance(d, str) else v
        object.__setattr__(self, "values", full)
        self._validate()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_ini(cls, text: str) -> "ScenarioConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed scenario file: {exc}") from None
        return cls({s: dict(cp.items(s)) for s in cp.sections()})

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        return cls.from_ini(Path(path).read_text())

    def with_overrides(self, overrides) -> "ScenarioConfig":
        """Apply ``section.key=value`` strings or a ``{"section.key": value}`` mapping."""
        if isinstance(overrides, dict):
            items = list(overrides.items())
        else:
            items = []
            for o in overrides:
                if "=" not in o:
                    raise ConfigError(f"override {o!r}: expected section.key=value")
                k, v = o.split("=", 1)
                items.append((k.strip(), v))
        vals = {s: dict(v) for s, v in self.values.items()}
        for k, v in items:
            if "." not in k:
                raise ConfigError(f"override {k!r}: expected section.key")
            s, key = k.split(".", 1)
            if s not in SCHEMA or key not in SCHEMA[s]:
                raise ConfigError(f"{k}: unknown key")
            d = SCHEMA[s][key]
            vals[s][key] = _parse(s, key, d, v) if isinstance(v, str) else v
        return ScenarioConfig(vals)

    def to_ini(self) -> str:
        lines = []
        for s, keys in SCHEMA.items():
            lines.append(f"[{s}]")
            lines.extend(f"{k} = {_format(self.values[s][k])}" for k in keys)
            lines.append("")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.to_ini() == other.to_ini()

    # -- validation -------------------------------------------------------

    def _validate(self):
        v = self.values
        if not v["time"]["horizon"] > 0:
            raise ConfigError("time.horizon: must be > 0")
        if v["time"]["steps"] < 10:
            raise ConfigError("time.steps: must be >= 10")
        checks = [lambda: self.lattice, lambda: self.kernel, lambda: self.costs, lambda: self.controls,
                  self.kinetic_config, lambda: self.fixed_point, self.sim_config]
        for build in checks:
            try:
                build()
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(str(exc)) from None
        dt = v["time"]["horizon"] / v["time"]["steps"]
        lam = self.kernel.max_rate(self.controls)
        if dt * lam > 0.5:
            raise ConfigError(f"time.steps: dt*lambda_max = {dt * lam:g} exceeds 0.5; "
                              f"need steps >= {int(np.ceil(2 * lam * v['time']['horizon']))}")
        ini = v["initial"]
        if ini["kind"] not in _INITIAL_KINDS:
            raise ConfigError(f"initial.kind: must be one of {', '.join(_INITIAL_KINDS)}")
        if not v["domain"]["min"] <= ini["mean"] <= v["domain"]["max"]:
            raise ConfigError("initial.mean: must lie in the domain")
        if ini["kind"] == "gaussian" and not ini["std"] > 0:
            raise ConfigError("initial.std: must be > 0")
        ex = v["experiments"]
        for key in ("functional_N", "nash_N"):
            ns = ex[key]
            if len(ns) == 0 or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
                raise ConfigError(f"experiments.{key}: must be strictly increasing positive integers")
        for key in ("functional_reps", "functional_max_reps", "nash_reps", "limit_reps", "bootstrap"):
            if ex[key] < 2:
                raise ConfigError(f"experiments.{key}: must be >= 2")
        if not 0 < ex["functional_se_ratio"]:
            raise ConfigError("experiments.functional_se_ratio: must be > 0")
        if ex["deviation_constants"] < 0:
            raise ConfigError("experiments.deviation_constants: must be >= 0")
        if not v["domain"]["min"] <= ex["x0"] <= v["domain"]["max"]:
            raise ConfigError("experiments.x0: must lie in the domain")
        if v["simulation"]["workers"] < 1:
            raise ConfigError("simulation.workers: must be >= 1")

    # -- component views --------------------------------------------------

    @property
    def name(self) -> str:
        return self.values["scenario"]["name"]

    @property
    def lattice(self) -> Lattice:
        d = self.values["domain"]
        try:
            return Lattice([d["min"]], [d["max"]], d["nodes"])
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from None

    @property
    def kernel(self) -> JumpKernelSpec:
        return JumpKernelSpec(**self.values["kernel"])

    @property
    def costs(self) -> CostSpec:
        return CostSpec(**self.values["costs"])

    @property
    def controls(self) -> ControlSet:
        return ControlSet(**self.values["controls"])

    @property
    def horizon(self) -> float:
        return float(self.values["time"]["horizon"])

    @property
    def fixed_point(self) -> FixedPointConfig:
        return FixedPointConfig(**self.values["fixed_point"])

    @property
    def experiments(self) -> dict:
        return dict(self.values["experiments"])

    def kinetic_config(self) -> KineticSolveConfig:
        k = self.values["kinetic"]
        return KineticSolveConfig(t_steps=self.values["time"]["steps"], integrator=k["integrator"],
                                  clip_negatives=k["clip_negatives"])

    def sim_config(self, **changes) -> SimConfig:
        s = {k: v for k, v in self.values["simulation"].items() if k != "workers"}
        s.update(changes)
        return SimConfig(**s)

    @property
    def workers(self) -> int:
        return int(self.values["simulation"]["workers"])

    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.values["time"]["steps"] + 1)

    def initial_measure(self) -> GridMeasure:
        lat = self.lattice
        ini = self.values["initial"]
        if ini["kind"] == "uniform":
            return GridMeasure.from_density(lat, np.ones(lat.size))
        if ini["kind"] == "point":
            return GridMeasure.dirac(lat, int(lat.nearest_node([[ini["mean"]]])[0]))
        return GridMeasure.from_density(lat, np.exp(-0.5 * ((lat.x - ini["mean"]) / ini["std"]) ** 2))


def bundled_scenarios() -> list:
    files = resources.files("jumpmfg") / "scenarios"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def load_scenario(name_or_path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name (``default``, ``decoupled``)."""
    p = Path(name_or_path)
    if p.is_file():
        return ScenarioConfig.from_file(p)
    stem = p.name[:-4] if p.name.endswith(".cfg") else p.name
    res = resources.files("jumpmfg") / "scenarios" / f"{stem}.cfg"
    if res.is_file():
        return ScenarioConfig.from_ini(res.read_text())
    raise ConfigError(f"scenario {str(name_or_path)!r}: no such file or bundled scenario")
