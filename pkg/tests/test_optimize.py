import math

import numpy as np
import pytest

from saqite.backend import Rng
from saqite.circuits import build_hea, build_qaoa
from saqite.evolve import ResourceModel, count_measurements
from saqite.linsolve import solve_diag_shift
from saqite.optimize import (
    OptimizerConfig,
    p_optimal,
    qnspsa_minimize,
    sample_schedule,
    saqite_minimize,
    spsa_gradient_step,
    spsa_minimize,
)
from saqite.pauli import (
    PauliString,
    PauliSum,
    brute_force_minimum,
    build_maxcut_circle,
)


def _small_problem():
    h = build_maxcut_circle(6, 2.0, -2.0)
    c = build_qaoa(h, 2)
    _, optimal = brute_force_minimum(h)
    theta0 = np.array([1e-3, 1e-2, 1e-3, 1e-2])
    return h, c, optimal, theta0


def test_sample_schedule_decays_to_one():
    values = [sample_schedule(10, 0.9, k) for k in range(1, 40)]
    assert values[0] == 9
    assert values[1] == 8
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] == 1
    assert min(values) == 1


def test_sample_schedule_flat_when_decay_is_one():
    assert [sample_schedule(7, 1.0, k) for k in (1, 5, 50)] == [7, 7, 7]


def test_spsa_step_quadratic_bowl_decreases_in_expectation():
    def bowl(theta, rng):
        return float(theta @ theta)

    drops = 0
    for seed in range(50):
        rng = Rng(seed)
        theta = np.array([1.0, -0.8, 0.6, 0.3])
        for k in range(30):
            theta = spsa_gradient_step(bowl, theta, eta=0.05, epsilon=1e-3, rng=rng.child(k))
        if theta @ theta < 1.0 + 0.64 + 0.36 + 0.09 - 0.5:
            drops += 1
    assert drops >= 45


def test_spsa_constant_energy_never_moves():
    h = PauliSum.from_terms(2, [(3.0, PauliString.from_label("II"))])
    c = build_hea(2, 1)
    cfg = OptimizerConfig(eta=0.1, epsilon=1e-2, shots=128, iters=10, seed=4)
    theta0 = np.full(c.n_params, 0.2)
    log = spsa_minimize(c, h, theta0, cfg)
    assert np.allclose(log.thetas, theta0, atol=1e-15)


def test_spsa_measurement_accounting():
    h, c, optimal, theta0 = _small_problem()
    cfg = OptimizerConfig(eta=1e-4, epsilon=1e-2, shots=100, iters=5, seed=0)
    log = spsa_minimize(c, h, theta0, cfg, optimal=optimal)
    # diagonal Hamiltonian: one basis, two evaluations per iteration
    assert log.measurements_cumulative[-1] == 5 * 2 * 100
    assert np.all(np.diff(log.measurements_cumulative) == 200)


def test_qnspsa_identity_metric_scales_like_spsa():
    # with the metric pinned at the identity the natural step is the plain
    # gradient step divided by (1 + delta)
    b = np.array([0.4, -0.2, 0.1])
    delta = 100.0
    scaled = solve_diag_shift(np.eye(3), b, delta).theta_dot
    assert np.allclose(scaled, b / (1.0 + delta), atol=1e-12)


def test_qnspsa_runs_and_accounts_measurements():
    h, c, optimal, theta0 = _small_problem()
    cfg = OptimizerConfig(eta=1e-3, epsilon=1e-2, shots=200, iters=6, delta=10.0, seed=1)
    log = qnspsa_minimize(c, h, theta0, cfg, optimal=optimal)
    model = ResourceModel.for_hamiltonian(h)
    per_iter = count_measurements("saqite", model, 200, n_samples=1)
    assert per_iter == (4 + 2) * 200
    assert log.measurements_cumulative[-1] == 6 * per_iter
    assert len(log.energies) == 7


def test_saqite_minimize_schedule_measurements():
    h, c, optimal, theta0 = _small_problem()
    cfg = OptimizerConfig(
        eta=1e-3, epsilon=1e-2, shots=50, iters=4, n0=10, decay=0.9,
        tau1=0.99, tau2=0.0, delta=10.0, seed=2,
    )
    log = saqite_minimize(c, h, theta0, cfg, optimal=optimal)
    model = ResourceModel.for_hamiltonian(h)
    expected = np.cumsum(
        [
            count_measurements(
                "saqite", model, 50, n_samples=sample_schedule(10, 0.9, k)
            )
            for k in range(1, 5)
        ]
    )
    assert np.array_equal(log.measurements_cumulative[1:], expected)


def test_saqite_minimize_deterministic():
    h, c, optimal, theta0 = _small_problem()
    cfg = OptimizerConfig(
        eta=1e-3, epsilon=1e-2, shots=64, iters=3, n0=4, seed=9, delta=10.0
    )
    a = saqite_minimize(c, h, theta0, cfg, optimal=optimal)
    b = saqite_minimize(c, h, theta0, cfg, optimal=optimal)
    assert np.array_equal(a.thetas, b.thetas)
    assert np.array_equal(a.p_optimal, b.p_optimal)


def test_saqite_minimize_descends_small_maxcut():
    h, c, optimal, theta0 = _small_problem()
    cfg = OptimizerConfig(
        eta=5e-3, epsilon=1e-2, shots=math.inf, iters=60, n0=5, decay=0.9,
        tau1=0.9, tau2=0.0, delta=1.0, seed=3,
    )
    log = saqite_minimize(c, h, theta0, cfg, optimal=optimal)
    assert log.energies[-1] < log.energies[0] - 1.0
    assert log.p_optimal[-1] > log.p_optimal[0]


def test_p_optimal_all_strings_is_one():
    state = np.full(8, 1 / np.sqrt(8), dtype=complex)
    everything = [format(k, "03b") for k in range(8)]
    assert np.isclose(p_optimal(state, everything), 1.0)


def test_p_optimal_uniform_subset():
    state = np.full(16, 0.25, dtype=complex)
    assert np.isclose(p_optimal(state, ["0000", "1111", "0101"]), 3 / 16)


def test_p_optimal_basis_state_membership():
    state = np.zeros(4, dtype=complex)
    state[int("10", 2)] = 1.0
    assert p_optimal(state, ["10"]) == 1.0
    assert p_optimal(state, ["01"]) == 0.0


def test_p_optimal_validates_input():
    state = np.full(4, 0.5, dtype=complex)
    with pytest.raises(ValueError):
        p_optimal(state, [])
    with pytest.raises(ValueError):
        p_optimal(state, ["101"])


def test_optimizer_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(eta=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(eta=1e-3, decay=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(eta=1e-3, n0=0)
