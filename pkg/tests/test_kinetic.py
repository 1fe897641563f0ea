import numpy as np
import pytest
from scipy.linalg import expm, null_space

from jumpmfg.measures import GridMeasure, tv_distance
from jumpmfg.model import ControlSet, FeedbackControl, JumpKernelSpec, generator_matrix, hypothesis_probe
from jumpmfg.kinetic import (KineticSolveConfig, StabilityError, initial_sensitivity_probe, kinetic_step,
                             solve_kinetic)

RK4 = KineticSolveConfig(200, "rk4")


def test_config_validation():
    with pytest.raises(ValueError, match="t_steps"):
        KineticSolveConfig(5)
    with pytest.raises(ValueError, match="integrator"):
        KineticSolveConfig(100, "heun")


def test_no_jumps_leaves_measure_unchanged(gaussian0):
    k = JumpKernelSpec(base_rate=0, control_gain=0)
    out = kinetic_step(gaussian0, 0.0, 0.01, 0.5, k)
    assert np.array_equal(out.weights, gaussian0.weights)
    curve = solve_kinetic(gaussian0, 0.5, k, RK4, 1.0)
    assert np.array_equal(curve.weights[-1], gaussian0.weights)


@pytest.mark.parametrize("integrator", ["euler", "rk4"])
def test_step_conserves_mass(kernel, gaussian0, integrator):
    out = kinetic_step(gaussian0, 0.0, 0.005, 0.7, kernel, integrator=integrator)
    assert out.mass == pytest.approx(1.0, abs=1e-9)


def test_euler_step_matches_dense_matrix(lattice):
    k = JumpKernelSpec(mean_pull=1.0)
    mu = GridMeasure.dirac(lattice, 20)
    u = np.full(lattice.size, 0.5)
    dt = 0.001
    out = kinetic_step(mu, 0.0, dt, u, k, integrator="euler")
    L = generator_matrix(k, lattice, 0.2, u)
    oracle = mu.weights + dt * (L.T @ mu.weights)
    np.testing.assert_allclose(out.weights, oracle, atol=1e-12)
    gained = out.weights.copy()
    gained[20] = 0
    assert np.argmax(gained) == 20 or abs(lattice.x[np.argmax(gained)] - 0.2) <= 0.02


def test_stability_guard_names_required_step(kernel, gaussian0, controls):
    with pytest.raises(StabilityError, match="dt <= 0.166667"):
        kinetic_step(gaussian0, 0.0, 0.2, 0.5, kernel, controls=controls)
    with pytest.raises(StabilityError):
        solve_kinetic(gaussian0, 0.5, kernel, KineticSolveConfig(10), 5.0, controls=controls)


def test_linear_case_matches_matrix_exponential(lattice, gaussian0):
    k = JumpKernelSpec(mean_pull=0.0)
    curve = solve_kinetic(gaussian0, 0.6, k, RK4, 1.0)
    A = generator_matrix(k, lattice, 0.0, np.full(lattice.size, 0.6)).T
    worst = max(np.abs(curve.weights[i] - expm(t * A) @ gaussian0.weights).max()
                for i, t in enumerate(curve.times) if i % 20 == 0)
    assert worst <= 1e-6


def test_zero_horizon_returns_initial_measure(kernel, gaussian0):
    curve = solve_kinetic(gaussian0, 0.5, kernel, RK4, 0.0)
    assert len(curve) == 1
    assert np.array_equal(curve.weights[0], gaussian0.weights)


def test_rejects_non_probability(kernel, lattice):
    with pytest.raises(ValueError):
        solve_kinetic(GridMeasure(lattice, np.full(lattice.size, 0.02)), 0.5, kernel, RK4, 1.0)


def test_stationary_law_stays_put(lattice):
    k = JumpKernelSpec(mean_pull=0.0)
    A = generator_matrix(k, lattice, 0.0, np.full(lattice.size, 0.4)).T
    pi = null_space(A)[:, 0]
    pi = GridMeasure(lattice, np.abs(pi) / np.abs(pi).sum())
    curve = solve_kinetic(pi, 0.4, k, RK4, 1.0)
    assert max(tv_distance(pi, curve[i]) for i in range(len(curve))) <= 1e-5


def test_full_horizon_mass_and_positivity(kernel, gaussian0, controls):
    t = np.linspace(0, 1, 201)
    gamma = FeedbackControl(t, np.tile(np.linspace(0, 1, gaussian0.lattice.size), (201, 1)))
    curve, diag = solve_kinetic(gaussian0, gamma, kernel, RK4, 1.0, controls=controls, return_diagnostics=True)
    assert diag["mass_drift"] <= 1e-7
    assert diag["min_weight"] >= -1e-12
    assert np.abs(curve.masses() - 1.0).max() <= 1e-8


def test_sensitivity_linear_bound(lattice, gaussian0, controls):
    k = JumpKernelSpec(mean_pull=0.0)
    eta = GridMeasure.uniform(lattice)
    t, r = initial_sensitivity_probe(gaussian0, eta, 0.8, k, RK4, 1.0)
    assert r[0] == pytest.approx(1.0)
    assert np.all(r <= np.exp(2 * k.max_rate(controls) * t) + 1e-12)


def test_sensitivity_symmetric_in_arguments(kernel, lattice, gaussian0):
    eta = GridMeasure.uniform(lattice)
    _, a = initial_sensitivity_probe(gaussian0, eta, 0.5, kernel, RK4, 1.0)
    _, b = initial_sensitivity_probe(eta, gaussian0, 0.5, kernel, RK4, 1.0)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_sensitivity_gronwall_envelope(kernel, costs, controls, lattice, gaussian0):
    C = hypothesis_probe(kernel, costs, controls, lattice, samples=200).gronwall_constant
    eta = GridMeasure.from_density(lattice, np.exp(-0.5 * ((lattice.x - 0.7) / 0.1) ** 2))
    t, r = initial_sensitivity_probe(gaussian0, eta, 0.5, kernel, RK4, 1.0)
    assert np.all(r <= np.exp(C * t))


def test_sensitivity_rejects_identical_inputs(kernel, gaussian0):
    with pytest.raises(ValueError):
        initial_sensitivity_probe(gaussian0, gaussian0, 0.5, kernel, RK4, 1.0)


def _final(kernel, mu0, integrator, steps):
    return solve_kinetic(mu0, 0.5, kernel, KineticSolveConfig(steps, integrator), 1.0).weights[-1]


def test_euler_refinement_is_first_order(kernel, gaussian0):
    ref = _final(kernel, gaussian0, "rk4", 800)
    e1 = np.abs(_final(kernel, gaussian0, "euler", 50) - ref).sum()
    e2 = np.abs(_final(kernel, gaussian0, "euler", 100) - ref).sum()
    assert 1.6 <= e1 / e2 <= 2.4


def test_rk4_refinement_is_high_order(kernel, gaussian0):
    ref = _final(kernel, gaussian0, "rk4", 800)
    e1 = np.abs(_final(kernel, gaussian0, "rk4", 20) - ref).sum()
    e2 = np.abs(_final(kernel, gaussian0, "rk4", 40) - ref).sum()
    assert e1 / e2 >= 10
