import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumpmfg.measures import GridMeasure, Lattice
from jumpmfg.model import (ControlSet, CostSpec, FeedbackControl, JumpKernelSpec, apply_adjoint, apply_generator,
                           destination_matrix, generator_matrix, hypothesis_probe, intensity, jump_density,
                           running_cost)


def test_intensity_examples(controls):
    k = JumpKernelSpec(base_rate=1, control_gain=2)
    assert intensity(k, 0, 0.3, None, 0.0) == 1.0
    assert intensity(k, 0, 0.3, None, 0.5) == 2.0
    flat = JumpKernelSpec(base_rate=1.5, control_gain=0)
    assert all(intensity(flat, 0, 0.3, None, u) == 1.5 for u in (0, 0.3, 1))


def test_intensity_rejects_control_outside_set(controls):
    with pytest.raises(ValueError):
        intensity(JumpKernelSpec(), 0, 0.5, None, 1.5, controls)


@pytest.mark.parametrize("field,value", [("base_rate", -1), ("control_gain", -0.1), ("mean_pull", 1.5),
                                         ("jump_sigma", 0)])
def test_kernel_validation(field, value):
    with pytest.raises(ValueError, match=f"kernel.{field}"):
        JumpKernelSpec(**{field: value})


def test_cost_and_control_validation():
    with pytest.raises(ValueError, match="control_curvature"):
        CostSpec(control_curvature=0)
    with pytest.raises(ValueError, match="u_min"):
        ControlSet(1, 1)


def test_jump_density_flat_limit(lattice, gaussian0):
    k = JumpKernelSpec(mean_pull=0.0, jump_sigma=1e3)
    q = jump_density(k, 0, 0.3, gaussian0)
    assert q.max() / q.min() < 1 + 1e-5


def test_jump_density_full_mean_pull(lattice):
    k = JumpKernelSpec(mean_pull=1.0)
    m = GridMeasure.dirac(lattice, 50)
    for x in (0.0, 0.2, 0.9):
        assert np.argmax(jump_density(k, 0, x, m)) == 50


def test_jump_density_integrates_to_one(lattice, gaussian0):
    for x in np.linspace(0, 1, 7):
        q = jump_density(JumpKernelSpec(), 0, x, gaussian0)
        assert q @ lattice.quadrature_weights == pytest.approx(1.0, abs=1e-12)


def test_jump_density_rejects_zero_mass(lattice):
    with pytest.raises(ValueError):
        jump_density(JumpKernelSpec(), 0, 0.5, GridMeasure(lattice, np.zeros(lattice.size)))


def test_destination_rows_survive_far_centres():
    lat = Lattice.unit(101)
    Q = destination_matrix(JumpKernelSpec(jump_sigma=1e-3), lat, 0.5, origins=[-5.0, 6.0])
    assert np.all(np.isfinite(Q))
    np.testing.assert_allclose(Q.sum(axis=1), 1.0)


def test_generator_is_conservative(kernel, gaussian0, controls):
    rng = np.random.default_rng(1)
    for _ in range(5):
        gamma = rng.uniform(controls.u_min, controls.u_max, gaussian0.lattice.size)
        out = apply_generator(kernel, 0, gaussian0, gamma, np.ones(gaussian0.lattice.size))
        assert np.abs(out).max() <= 1e-12


def test_generator_vanishes_without_jumps(gaussian0):
    k = JumpKernelSpec(base_rate=0, control_gain=0)
    f = np.sin(7 * gaussian0.lattice.x)
    assert np.all(apply_generator(k, 0, gaussian0, 0.7, f) == 0)
    assert np.all(apply_adjoint(k, 0, gaussian0, 0.7) == 0)


def test_symmetric_kernel_has_no_drift_on_affine_functions(lattice, gaussian0):
    k = JumpKernelSpec(mean_pull=0.0, jump_sigma=0.02)
    out = apply_generator(k, 0, gaussian0, 0.5, lattice.x)
    interior = (lattice.x > 0.2) & (lattice.x < 0.8)
    assert np.abs(out[interior]).max() <= 1e-6


def test_generator_matches_dense_matrix(kernel, gaussian0):
    lat = gaussian0.lattice
    u = np.linspace(0, 1, lat.size)
    f = np.cos(5 * lat.x)
    L = generator_matrix(kernel, lat, float(gaussian0.mean()[0]), u)
    np.testing.assert_allclose(apply_generator(kernel, 0, gaussian0, u, f), L @ f, atol=1e-13)
    np.testing.assert_allclose(apply_adjoint(kernel, 0, gaussian0, u), L.T @ gaussian0.weights, atol=1e-13)


def test_adjoint_conserves_mass_and_is_dual(kernel, lattice):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        mu = GridMeasure(lattice, rng.dirichlet(np.full(lattice.size, 0.5)))
        gamma = rng.uniform(0, 1, lattice.size)
        adj = apply_adjoint(kernel, 0, mu, gamma)
        assert abs(adj.sum()) <= 1e-9
        f = rng.uniform(-1, 1, lattice.size)
        worst = max(worst, abs(apply_generator(kernel, 0, mu, gamma, f) @ mu.weights - f @ adj))
    assert worst <= 1e-8


def test_feedback_control_accepted_by_generator(kernel, gaussian0):
    t = np.linspace(0, 1, 11)
    fc = FeedbackControl(t, np.tile(np.linspace(0, 1, gaussian0.lattice.size), (11, 1)))
    f = gaussian0.lattice.x ** 2
    np.testing.assert_allclose(apply_generator(kernel, 0.55, gaussian0, fc, f),
                               apply_generator(kernel, 0.55, gaussian0, fc.values[5], f))


@settings(max_examples=30)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_hamiltonian_is_concave_in_u(x, mean, D, a):
    c = CostSpec(reward_slope=a)
    k = JumpKernelSpec()
    u = ControlSet().grid()
    theta = running_cost(c, x, mean, u) + k.rate(u) * D
    assert np.all(np.diff(theta, 2) <= 1e-12)


def test_intensity_bounded_by_lambda_max(kernel, controls):
    assert np.all(kernel.rate(controls.grid()) <= kernel.max_rate(controls))


def test_probe_reports_exact_curvature(kernel, controls, lattice):
    rep = hypothesis_probe(kernel, CostSpec(control_curvature=1.0), controls, lattice, samples=200)
    assert rep.uu_curvature == pytest.approx(-1.0, abs=1e-9)
    assert rep.passed
    assert rep.lip_u == pytest.approx(kernel.control_gain, rel=1e-9)


def test_probe_mu_lipschitz_vanishes_without_mean_pull(controls, lattice, costs):
    rep = hypothesis_probe(JumpKernelSpec(mean_pull=0.0), costs, controls, lattice, samples=200)
    assert rep.lip_mu <= 1e-12


def test_probe_x_lipschitz_is_stable_across_seeds(costs, controls, lattice):
    k = JumpKernelSpec(jump_sigma=0.1)
    a = hypothesis_probe(k, costs, controls, lattice, samples=500, seed=0).lip_x
    b = hypothesis_probe(k, costs, controls, lattice, samples=500, seed=1).lip_x
    assert 0 < a < np.inf
    assert abs(a - b) <= 0.1 * max(a, b)


def test_probe_rejects_too_few_samples(kernel, costs, controls, lattice):
    with pytest.raises(ValueError):
        hypothesis_probe(kernel, costs, controls, lattice, samples=10)
