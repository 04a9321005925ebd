"""Ground-state optimizers built on the perturbation-sampling machinery.

Three drivers share the measurement accounting of the evolution module:
plain simultaneous-perturbation descent, its natural-gradient variant
with a globally averaged metric started from the identity, and the
momentum/exact-init variant with a decaying per-iteration sample budget.
All report energies and solution overlaps evaluated noiselessly along
the iterate trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .backend import NoiseModel, Rng, expectation_exact, simulate
from .circuits import Circuit, bind
from .evolve import ResourceModel, count_measurements
from .gradients import (
    EstimatorState,
    SamplerConfig,
    evolution_gradient_exact,
    qgt_exact,
    sample_evolution_gradient,
    sample_qgt,
    sampled_energy_fn,
    sampled_fidelity_fn,
    update_global_average,
    update_momentum,
)
from .linsolve import solve_diag_shift, solve_stable_subspace
from .pauli import PauliSum


@dataclass(frozen=True)
class OptimizerConfig:
    """Shared settings for the three optimizers.

    ``eta`` is the learning rate (the Euler "timestep" for the natural
    gradient drivers); ``n0``/``decay`` control the per-iteration sample
    schedule N_k = max(1, floor(decay^k * n0)); ``decay=1`` keeps it flat.
    """

    eta: float
    epsilon: float = 1e-2
    shots: int | float = math.inf
    iters: int = 100
    n0: int = 10
    decay: float = 0.9
    tau1: float = 0.99
    tau2: float = 0.0
    delta: float = 100.0
    solver: str = "diag_shift"
    seed: int = 0
    noise: NoiseModel | None = None

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError("learning rate must be positive")
        if self.epsilon <= 0:
            raise ValueError("perturbation must be positive")
        if self.n0 < 1:
            raise ValueError("need at least one sample per iteration")
        if not 0 < self.decay <= 1:
            raise ValueError("decay factor must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class IterateLog:
    """Per-iteration trajectory of an optimizer run."""

    thetas: np.ndarray
    energies: np.ndarray
    p_optimal: np.ndarray | None
    measurements_cumulative: np.ndarray


def p_optimal(state: np.ndarray, optimal: Sequence[str]) -> float:
    """Total Born probability of the given bitstrings (MSB leftmost)."""
    if not optimal:
        raise ValueError("need at least one optimal bitstring")
    n = int(math.log2(state.size))
    total = 0.0
    for bits in optimal:
        if len(bits) != n:
            raise ValueError(f"bitstring {bits!r} does not match {n} qubits")
        total += float(abs(state[int(bits, 2)]) ** 2)
    return total


def sample_schedule(n0: int, decay: float, iteration: int) -> int:
    """Samples for 1-based iteration k: max(1, floor(decay^k * n0))."""
    return max(1, int(math.floor(decay**iteration * n0)))


def spsa_gradient_step(
    energy_fn: Callable[[np.ndarray, Rng], float],
    theta: np.ndarray,
    eta: float,
    epsilon: float,
    rng: Rng,
) -> np.ndarray:
    """One descent update from a single simultaneous-perturbation gradient."""
    delta = rng.rademacher(theta.size)
    diff = energy_fn(theta + epsilon * delta, rng) - energy_fn(
        theta - epsilon * delta, rng
    )
    return theta - eta * diff / (2.0 * epsilon) * delta


def _log_point(
    circuit: Circuit,
    theta: np.ndarray,
    h: PauliSum,
    optimal: Sequence[str] | None,
) -> tuple[float, float | None]:
    state = simulate(bind(circuit, theta))
    energy = expectation_exact(state, h)
    overlap = p_optimal(state, optimal) if optimal is not None else None
    return energy, overlap


def _assemble_log(
    thetas: list[np.ndarray],
    energies: list[float],
    overlaps: list[float | None],
    measurements: list[int],
) -> IterateLog:
    p_opt = None
    if overlaps and overlaps[0] is not None:
        p_opt = np.array(overlaps, dtype=float)
    return IterateLog(
        np.array(thetas),
        np.array(energies),
        p_opt,
        np.array(measurements, dtype=np.int64),
    )


def spsa_minimize(
    circuit: Circuit,
    h: PauliSum,
    theta0: Sequence[float],
    cfg: OptimizerConfig,
    optimal: Sequence[str] | None = None,
) -> IterateLog:
    """First-order descent with constant learning rate and perturbation."""
    theta = np.asarray(theta0, dtype=float).copy()
    rng = Rng(cfg.seed)
    model = ResourceModel.for_hamiltonian(h)
    energy_fn = sampled_energy_fn(circuit, h, cfg.shots, cfg.noise)
    per_iter = 0 if cfg.shots == math.inf else (
        model.spsa_energy_evals_per_sample * model.bases_per_energy * int(cfg.shots)
    )

    energy, overlap = _log_point(circuit, theta, h, optimal)
    thetas, energies, overlaps, measurements = [theta.copy()], [energy], [overlap], [0]
    for k in range(1, cfg.iters + 1):
        theta = spsa_gradient_step(energy_fn, theta, cfg.eta, cfg.epsilon, rng.child(k))
        energy, overlap = _log_point(circuit, theta, h, optimal)
        thetas.append(theta.copy())
        energies.append(energy)
        overlaps.append(overlap)
        measurements.append(measurements[-1] + per_iter)
    return _assemble_log(thetas, energies, overlaps, measurements)


def _matrix_abs(m: np.ndarray) -> np.ndarray:
    lam, basis = np.linalg.eigh((m + m.T) / 2.0)
    return (basis * np.abs(lam)) @ basis.T


def _natural_step(
    theta: np.ndarray,
    g_bar: np.ndarray,
    b_bar: np.ndarray,
    cfg: OptimizerConfig,
    psd_project: bool = False,
) -> np.ndarray:
    # the diagonal shift needs delta > |lambda_min|; sampled averages can go
    # far indefinite, so metric-from-identity drivers project to |lambda|
    if psd_project and cfg.solver == "diag_shift":
        g_bar = _matrix_abs(g_bar)
    if cfg.solver == "stable_subspace":
        report = solve_stable_subspace(g_bar, b_bar, cfg.delta)
    else:
        report = solve_diag_shift(g_bar, b_bar, cfg.delta)
    return theta + cfg.eta * report.theta_dot


def qnspsa_minimize(
    circuit: Circuit,
    h: PauliSum,
    theta0: Sequence[float],
    cfg: OptimizerConfig,
    optimal: Sequence[str] | None = None,
) -> IterateLog:
    """Natural-gradient descent with a globally averaged sampled metric.

    The metric starts from the identity and folds in one fresh sample per
    iteration; the gradient carries no momentum.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    d = theta.size
    rng = Rng(cfg.seed)
    model = ResourceModel.for_hamiltonian(h)
    sampler = SamplerConfig(epsilon=cfg.epsilon, n_samples=1, shots=cfg.shots)
    fidelity_fn = sampled_fidelity_fn(circuit, cfg.shots, cfg.noise)
    energy_fn = sampled_energy_fn(circuit, h, cfg.shots, cfg.noise)
    per_iter = count_measurements("saqite", model, cfg.shots, n_samples=1)

    estimator = EstimatorState(
        g_bar=np.eye(d), b_bar=np.zeros(d), tau1=0.0, tau2=0.0, mode="global_average"
    )
    energy, overlap = _log_point(circuit, theta, h, optimal)
    thetas, energies, overlaps, measurements = [theta.copy()], [energy], [overlap], [0]
    for k in range(1, cfg.iters + 1):
        step_rng = rng.child(k)
        g_sample = sample_qgt(circuit, theta, sampler, step_rng.child(0), fidelity_fn)
        b_sample = sample_evolution_gradient(
            circuit, theta, h, sampler, step_rng.child(1), energy_fn
        )
        estimator = update_global_average(estimator, g_sample)
        theta = _natural_step(theta, estimator.g_bar, b_sample, cfg, psd_project=True)
        energy, overlap = _log_point(circuit, theta, h, optimal)
        thetas.append(theta.copy())
        energies.append(energy)
        overlaps.append(overlap)
        measurements.append(measurements[-1] + per_iter)
    return _assemble_log(thetas, energies, overlaps, measurements)


def saqite_minimize(
    circuit: Circuit,
    h: PauliSum,
    theta0: Sequence[float],
    cfg: OptimizerConfig,
    optimal: Sequence[str] | None = None,
) -> IterateLog:
    """Momentum/exact-init natural gradient with a decaying sample budget.

    The metric and gradient start from their exact values at theta0; each
    iteration k draws N_k = max(1, floor(decay^k * n0)) samples, blends the
    metric with momentum tau1 (the gradient with tau2, zero by default),
    solves the regularized system, and takes an Euler step of size eta.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    rng = Rng(cfg.seed)
    model = ResourceModel.for_hamiltonian(h)
    fidelity_fn = sampled_fidelity_fn(circuit, cfg.shots, cfg.noise)
    energy_fn = sampled_energy_fn(circuit, h, cfg.shots, cfg.noise)

    estimator = EstimatorState(
        g_bar=qgt_exact(circuit, theta),
        b_bar=evolution_gradient_exact(circuit, theta, h),
        tau1=cfg.tau1,
        tau2=cfg.tau2,
        mode="momentum",
    )
    energy, overlap = _log_point(circuit, theta, h, optimal)
    thetas, energies, overlaps, measurements = [theta.copy()], [energy], [overlap], [0]
    for k in range(1, cfg.iters + 1):
        n_k = sample_schedule(cfg.n0, cfg.decay, k)
        sampler = SamplerConfig(epsilon=cfg.epsilon, n_samples=n_k, shots=cfg.shots)
        step_rng = rng.child(k)
        g_samples, b_samples = [], []
        for i in range(n_k):
            child = step_rng.child(i)
            g_samples.append(
                sample_qgt(circuit, theta, sampler, child.child(0), fidelity_fn)
            )
            b_samples.append(
                sample_evolution_gradient(
                    circuit, theta, h, sampler, child.child(1), energy_fn
                )
            )
        estimator = update_momentum(
            estimator, np.mean(g_samples, axis=0), np.mean(b_samples, axis=0)
        )
        theta = _natural_step(theta, estimator.g_bar, estimator.b_bar, cfg)
        energy, overlap = _log_point(circuit, theta, h, optimal)
        thetas.append(theta.copy())
        energies.append(energy)
        overlaps.append(overlap)
        measurements.append(
            measurements[-1]
            + count_measurements("saqite", model, cfg.shots, n_samples=n_k)
        )
    return _assemble_log(thetas, energies, overlaps, measurements)
