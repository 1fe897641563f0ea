"""Mean-field equilibria of pure-jump games on a bounded lattice, with N-player Monte-Carlo checks."""
from .config import ConfigError, ScenarioConfig, load_scenario
from .estimators import HJBSolver, KineticFlow, MeanFieldGame
from .hjb import ValueGrid, solve_hjb
from .kinetic import KineticSolveConfig, StabilityError, solve_kinetic
from .measures import EmpiricalMeasure, GridMeasure, Lattice, MeasureCurve, TestFunctional
from .mfg import EquilibriumSolution, FixedPointConfig, solve_equilibrium
from .model import ControlSet, CostSpec, FeedbackControl, JumpKernelSpec
from .particle import SimConfig, simulate_limit_player, simulate_nplayer, simulate_tagged

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ControlSet",
    "CostSpec",
    "EmpiricalMeasure",
    "EquilibriumSolution",
    "FeedbackControl",
    "FixedPointConfig",
    "GridMeasure",
    "HJBSolver",
    "JumpKernelSpec",
    "KineticFlow",
    "KineticSolveConfig",
    "Lattice",
    "MeanFieldGame",
    "MeasureCurve",
    "ScenarioConfig",
    "SimConfig",
    "StabilityError",
    "TestFunctional",
    "ValueGrid",
    "load_scenario",
    "simulate_limit_player",
    "simulate_nplayer",
    "simulate_tagged",
    "solve_equilibrium",
    "solve_hjb",
    "solve_kinetic",
]
