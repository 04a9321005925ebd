"""Imaginary-time evolution drivers and their accuracy/resource metrics.

Both drivers integrate the metric-gradient flow with forward Euler steps
of fixed size. The exact driver computes the full geometric tensor and
evolution gradient each step (optionally perturbed by the shot-noise
model below); the stochastic driver corrects an exactly initialized
estimator with perturbation samples and momentum averaging.

Shot-noise model for the exact driver at finite M: every tensor entry is
treated as a +/-1-observable estimate with prefactor 1/4 and perturbed by
a centered Gaussian of matching binomial variance; every gradient entry by
the parameter-shift propagation of the per-term binomial energy variance
at the current state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import NoiseModel, Rng, apply_pauli_sum, expectation_exact, simulate
from .circuits import Circuit, bind
from .gradients import (
    EstimatorState,
    SamplerConfig,
    evolution_gradient_exact,
    qgt_exact,
    sample_batch,
    sampled_energy_fn,
    sampled_fidelity_fn,
    update_momentum,
)
from .linsolve import SolveReport, solve_diag_shift, solve_stable_subspace
from .pauli import PauliSum, group_commuting_bases

SOLVERS = ("diag_shift", "stable_subspace")


@dataclass(frozen=True)
class EvolutionConfig:
    """Timestep, horizon, solver, and estimator settings for one run."""

    delta_t: float
    total_time: float
    solver: str = "stable_subspace"
    delta: float = 0.05
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    tau1: float = 0.99
    tau2: float = 0.7
    mode: str = "saqite"
    seed: int = 0
    noise: NoiseModel | None = None

    def __post_init__(self) -> None:
        if self.delta_t <= 0:
            raise ValueError("timestep must be positive")
        if self.total_time < 0:
            raise ValueError("total time must be non-negative")
        if self.delta <= 0:
            raise ValueError("regularization constant must be positive")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.mode not in ("varqite", "saqite"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.total_time / self.delta_t + 1e-9))


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Per-step trajectory log; all sequences have n_steps + 1 entries."""

    times: np.ndarray
    thetas: np.ndarray
    energies: np.ndarray
    fidelities_vs_reference: np.ndarray | None
    measurements_cumulative: np.ndarray


@dataclass(frozen=True)
class ResourceModel:
    """Declared circuit/measurement counting rules.

    One circuit per tensor element (upper triangle), two per gradient
    element (parameter shift), four fidelity circuits plus two energy
    evaluations per perturbation sample; each circuit is charged M shots
    and energies are charged once per commuting basis. The classically
    simulable exact initialization is charged zero.
    """

    qgt_circuits_per_element: int = 1
    grad_circuits_per_element: int = 2
    spsa_fidelity_circuits_per_sample: int = 4
    spsa_energy_evals_per_sample: int = 2
    bases_per_energy: int = 1

    @classmethod
    def for_hamiltonian(cls, h: PauliSum) -> "ResourceModel":
        return cls(bases_per_energy=len(group_commuting_bases(h)))


def count_measurements(
    mode: str,
    model: ResourceModel,
    shots: int | float,
    d: int | None = None,
    n_samples: int | None = None,
) -> int:
    """Measurements charged to a single step under the declared model."""
    if shots == math.inf:
        return 0
    if mode == "varqite":
        if d is None:
            raise ValueError("varqite accounting needs the parameter count")
        circuits = (
            d * (d + 1) // 2 * model.qgt_circuits_per_element
            + d * model.grad_circuits_per_element * model.bases_per_energy
        )
        return circuits * int(shots)
    if mode == "saqite":
        if n_samples is None:
            raise ValueError("saqite accounting needs the sample count")
        per_sample = (
            model.spsa_fidelity_circuits_per_sample
            + model.spsa_energy_evals_per_sample * model.bases_per_energy
        )
        return n_samples * per_sample * int(shots)
    raise ValueError(f"unknown mode {mode!r}")


def _solve(solver: str, g: np.ndarray, b: np.ndarray, delta: float) -> SolveReport:
    if solver == "diag_shift":
        return solve_diag_shift(g, b, delta)
    return solve_stable_subspace(g, b, delta)


def _sigma_energy(state: np.ndarray, h: PauliSum, shots: float) -> float:
    """Binomial std of a sampled energy at the given state and shot count."""
    var = 0.0
    for coeff, string in h.terms:
        one_term = PauliSum(h.n_qubits, ((1.0, string),))
        x = expectation_exact(state, one_term)
        var += coeff * coeff * max(0.0, 1.0 - x * x) / shots
    return math.sqrt(var)


def _perturb_qgt(g: np.ndarray, shots: float, rng: Rng) -> np.ndarray:
    sigma = 0.25 * np.sqrt(np.clip(1.0 - (4.0 * g) ** 2, 0.0, None) / shots)
    noise = rng.gen.normal(0.0, 1.0, g.shape) * sigma
    upper = np.triu(noise)
    return g + upper + np.triu(noise, 1).T


def _perturb_gradient(b: np.ndarray, sigma_e: float, rng: Rng) -> np.ndarray:
    sigma_b = math.sqrt(2.0) / 4.0 * sigma_e
    return b + rng.gen.normal(0.0, sigma_b, b.shape)


def _log_step(
    circuit: Circuit,
    theta: np.ndarray,
    h: PauliSum,
    reference: Sequence[np.ndarray] | None,
    step: int,
) -> tuple[float, float | None]:
    state = simulate(bind(circuit, theta))
    energy = expectation_exact(state, h)
    fidelity = None
    if reference is not None:
        fidelity = float(abs(np.vdot(state, reference[step])) ** 2)
    return energy, fidelity


def _assemble(
    cfg: EvolutionConfig,
    thetas: list[np.ndarray],
    energies: list[float],
    fidelities: list[float | None],
    measurements: list[int],
) -> EvolutionResult:
    times = np.arange(len(thetas)) * cfg.delta_t
    fids = None
    if fidelities and fidelities[0] is not None:
        fids = np.array(fidelities, dtype=float)
    return EvolutionResult(
        times,
        np.array(thetas),
        np.array(energies),
        fids,
        np.array(measurements, dtype=np.int64),
    )


def varqite(
    circuit: Circuit,
    theta0: Sequence[float],
    h: PauliSum,
    cfg: EvolutionConfig,
    reference_states: Sequence[np.ndarray] | None = None,
) -> EvolutionResult:
    """Exact-tensor imaginary-time evolution with forward Euler steps.

    With finite ``cfg.sampler.shots`` every tensor and gradient entry is
    perturbed according to the declared shot-noise model. Logged energies
    are noiseless evaluations of the parameter trajectory.
    """
    if cfg.mode != "varqite":
        raise ValueError("config mode must be 'varqite'")
    if reference_states is not None and len(reference_states) != cfg.n_steps + 1:
        raise ValueError("reference grid does not match the step grid")
    theta = np.asarray(theta0, dtype=float).copy()
    rng = Rng(cfg.seed)
    model = ResourceModel.for_hamiltonian(h)
    shots = cfg.sampler.shots
    per_step = count_measurements("varqite", model, shots, d=circuit.n_params)

    energy, fidelity = _log_step(circuit, theta, h, reference_states, 0)
    thetas, energies, fidelities, measurements = [theta.copy()], [energy], [fidelity], [0]
    for step in range(1, cfg.n_steps + 1):
        g = qgt_exact(circuit, theta)
        b = evolution_gradient_exact(circuit, theta, h)
        if shots != math.inf:
            step_rng = rng.child(step)
            state = simulate(bind(circuit, theta))
            g = _perturb_qgt(g, shots, step_rng.child(0))
            b = _perturb_gradient(b, _sigma_energy(state, h, shots), step_rng.child(1))
        try:
            report = _solve(cfg.solver, g, b, cfg.delta)
        except Exception as exc:
            raise RuntimeError(f"linear solve failed at step {step}") from exc
        theta = theta + cfg.delta_t * report.theta_dot
        energy, fidelity = _log_step(circuit, theta, h, reference_states, step)
        thetas.append(theta.copy())
        energies.append(energy)
        fidelities.append(fidelity)
        measurements.append(measurements[-1] + per_step)
    return _assemble(cfg, thetas, energies, fidelities, measurements)


def saqite(
    circuit: Circuit,
    theta0: Sequence[float],
    h: PauliSum,
    cfg: EvolutionConfig,
    reference_states: Sequence[np.ndarray] | None = None,
) -> EvolutionResult:
    """Stochastic-approximation imaginary-time evolution.

    The estimator starts from the exact tensor and gradient at theta0 and
    is corrected each step with a batch of perturbation samples blended in
    by momentum, after which the regularized system is solved and one
    Euler step taken.
    """
    if cfg.mode != "saqite":
        raise ValueError("config mode must be 'saqite'")
    if reference_states is not None and len(reference_states) != cfg.n_steps + 1:
        raise ValueError("reference grid does not match the step grid")
    theta = np.asarray(theta0, dtype=float).copy()
    rng = Rng(cfg.seed)
    model = ResourceModel.for_hamiltonian(h)
    sampler = cfg.sampler
    per_step = count_measurements(
        "saqite", model, sampler.shots, n_samples=sampler.n_samples
    )
    fidelity_fn = sampled_fidelity_fn(circuit, sampler.shots, cfg.noise)
    energy_fn = sampled_energy_fn(circuit, h, sampler.shots, cfg.noise)

    estimator = EstimatorState(
        g_bar=qgt_exact(circuit, theta),
        b_bar=evolution_gradient_exact(circuit, theta, h),
        tau1=cfg.tau1,
        tau2=cfg.tau2,
        mode="momentum",
    )
    energy, fidelity = _log_step(circuit, theta, h, reference_states, 0)
    thetas, energies, fidelities, measurements = [theta.copy()], [energy], [fidelity], [0]
    for step in range(1, cfg.n_steps + 1):
        g_batch, b_batch = sample_batch(
            circuit, theta, h, sampler, rng.child(step), fidelity_fn, energy_fn
        )
        estimator = update_momentum(estimator, g_batch, b_batch)
        try:
            report = _solve(cfg.solver, estimator.g_bar, estimator.b_bar, cfg.delta)
        except Exception as exc:
            raise RuntimeError(f"linear solve failed at step {step}") from exc
        theta = theta + cfg.delta_t * report.theta_dot
        energy, fidelity = _log_step(circuit, theta, h, reference_states, step)
        thetas.append(theta.copy())
        energies.append(energy)
        fidelities.append(fidelity)
        measurements.append(measurements[-1] + per_step)
    return _assemble(cfg, thetas, energies, fidelities, measurements)


def reference_taylor(
    h: PauliSum, psi0: np.ndarray, delta_t: float, total_time: float
) -> list[np.ndarray]:
    """Normalized first-order expansion of the imaginary-time propagator.

    Applies ``psi <- (I - dt*H) psi`` followed by renormalization and
    returns the states at every step (including the initial one).
    """
    if delta_t <= 0:
        raise ValueError("timestep must be positive")
    psi = np.asarray(psi0, dtype=complex).copy()
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("initial state must be non-zero")
    psi /= norm
    states = [psi.copy()]
    steps = int(math.floor(total_time / delta_t + 1e-9))
    for step in range(1, steps + 1):
        psi = psi - delta_t * apply_pauli_sum(h, psi)
        norm = np.linalg.norm(psi)
        if norm < 1e-12:
            raise ValueError(
                f"state norm vanished at step {step}; decrease the timestep"
            )
        psi = psi / norm
        states.append(psi.copy())
    return states


def subsample_states(
    states: Sequence[np.ndarray], fine_dt: float, coarse_dt: float, n_steps: int
) -> list[np.ndarray]:
    """Pick the fine-grid states nearest to each coarse-grid time."""
    picked = []
    for k in range(n_steps + 1):
        index = int(round(k * coarse_dt / fine_dt))
        if index >= len(states):
            raise ValueError("fine reference does not cover the coarse grid")
        picked.append(states[index])
    return picked


def integrated_infidelity(
    result: EvolutionResult,
    reference: Sequence[np.ndarray] | None = None,
    circuit: Circuit | None = None,
    total_time: float | None = None,
) -> float:
    """Trapezoidal time average of 1 - F(t) against the reference states.

    Uses the fidelities logged in the result when present; otherwise they
    are recomputed from the parameter trajectory (requires the circuit).
    """
    times = result.times
    if total_time is None:
        total_time = float(times[-1])
    if result.fidelities_vs_reference is not None and reference is None:
        fidelities = result.fidelities_vs_reference
    else:
        if reference is None or circuit is None:
            raise ValueError("need either logged fidelities or (reference, circuit)")
        if len(reference) != len(times):
            raise ValueError("reference grid does not match the step grid")
        fidelities = np.array(
            [
                abs(np.vdot(simulate(bind(circuit, theta)), ref)) ** 2
                for theta, ref in zip(result.thetas, reference)
            ]
        )
    infidelity = 1.0 - np.asarray(fidelities, dtype=float)
    if total_time <= 0 or len(times) < 2:
        return float(infidelity[0])
    return float(np.trapezoid(infidelity, times) / total_time)
