"""Exact and sampled quantum geometric tensor and evolution gradient.

Exact quantities insert analytic derivative factors into the statevector
simulation: a rotation ``exp(-i*scale*theta*P/2)`` contributes the branch
state ``(-i*scale/2) * P * U |prefix>`` at its circuit position, summed
over all positions sharing a parameter. Sampled quantities use
simultaneous-perturbation finite differences of the fidelity (two nested
directions) and of the energy (one direction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .backend import (
    NoiseModel,
    Rng,
    apply_gate,
    apply_pauli_sum,
    expectation_exact,
    expectation_sampled,
    fidelity_compute_uncompute,
    fidelity_exact,
    simulate,
)
from .circuits import Circuit, Gate, bind
from .pauli import PauliSum

_GENERATOR_1Q = {"RX": "X", "RY": "Y", "RZ": "Z"}

# fidelity_fn(theta, omega, rng) -> float;  energy_fn(theta, rng) -> float
FidelityFn = Callable[[np.ndarray, np.ndarray, Rng], float]
EnergyFn = Callable[[np.ndarray, Rng], float]


@dataclass(frozen=True)
class SamplerConfig:
    """Perturbation magnitude, batch size, and shots for SPSA sampling.

    ``epsilon=None`` resolves to 1e-2 in exact-probability mode and 1e-1
    for shot-based evaluation.
    """

    epsilon: float | None = None
    n_samples: int = 1
    shots: int | float = math.inf

    def __post_init__(self) -> None:
        if self.epsilon is None:
            object.__setattr__(
                self, "epsilon", 1e-2 if self.shots == math.inf else 1e-1
            )
        if self.epsilon <= 0:
            raise ValueError("perturbation magnitude must be positive")
        if self.n_samples < 1:
            raise ValueError("need at least one sample per step")


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Running QGT and gradient estimates with momenta and a step counter."""

    g_bar: np.ndarray
    b_bar: np.ndarray
    tau1: float
    tau2: float
    k: int = 0
    mode: str = "momentum"

    def __post_init__(self) -> None:
        if self.mode not in ("momentum", "global_average"):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if not (0.0 <= self.tau1 < 1.0 and 0.0 <= self.tau2 < 1.0):
            raise ValueError("momenta must lie in [0, 1)")
        if self.k < 0:
            raise ValueError("step counter must be non-negative")


def _apply_generator(states: np.ndarray, gate: Gate) -> None:
    """Multiply rows by -i*scale/2 and apply the rotation generator."""
    flat = states.reshape(-1)
    if gate.kind == "RZZ":
        for q in gate.qubits:
            apply_gate(flat, Gate("Z", (q,)))
    else:
        apply_gate(flat, Gate(_GENERATOR_1Q[gate.kind], (gate.qubits[0],)))
    states *= -0.5j * gate.scale


def derivative_states(circuit: Circuit, theta: Sequence[float]) -> np.ndarray:
    """All |d phi/d theta_i> stacked as rows of a (d, 2^n) array.

    A single forward sweep carries the evolving prefix state (row 0) plus
    one branch row per parameter; each gate is applied to every active row
    at once, so the derivative of a parameter appearing in several gates
    accumulates by the product rule.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters")
    dim = 1 << circuit.n_qubits
    d = circuit.n_params
    batch = np.zeros((d + 1, dim), dtype=complex)
    batch[0, 0] = 1.0
    started = np.zeros(d, dtype=bool)

    for gate in circuit.gates:
        if gate.param is None:
            bound = gate
        else:
            angle = gate.scale * float(theta[gate.param])
            bound = replace(gate, angle=angle, param=None, scale=1.0)
        apply_gate(batch.reshape(-1), bound)
        if gate.param is not None:
            branch = batch[0].copy()[None, :]
            _apply_generator(branch, gate)
            row = 1 + gate.param
            if started[gate.param]:
                batch[row] += branch[0]
            else:
                batch[row] = branch[0]
                started[gate.param] = True
    return batch[1:]


def qgt_exact(circuit: Circuit, theta: Sequence[float]) -> np.ndarray:
    """Real part of the geometric tensor, Re(<d_i|d_j> - <d_i|phi><phi|d_j>)."""
    derivs = derivative_states(circuit, theta)
    phi = simulate(bind(circuit, theta))
    gram = derivs.conj() @ derivs.T
    overlap = derivs.conj() @ phi  # <d_i|phi>
    g = (gram - np.outer(overlap, overlap.conj())).real
    return (g + g.T) / 2.0


def evolution_gradient_exact(
    circuit: Circuit, theta: Sequence[float], h: PauliSum
) -> np.ndarray:
    """b_i = -Re(<d_i phi|H|phi>), which equals -(1/2) dE/d theta_i."""
    derivs = derivative_states(circuit, theta)
    phi = simulate(bind(circuit, theta))
    h_phi = apply_pauli_sum(h, phi)
    return -(derivs.conj() @ h_phi).real


def exact_fidelity_fn(circuit: Circuit) -> FidelityFn:
    """Exact-overlap fidelity with the left state cached per theta."""
    cache: dict[bytes, np.ndarray] = {}

    def fn(theta: np.ndarray, omega: np.ndarray, rng: Rng) -> float:
        key = np.asarray(theta, dtype=float).tobytes()
        left = cache.get(key)
        if left is None:
            cache.clear()  # one anchor point at a time is enough
            left = simulate(bind(circuit, theta))
            cache[key] = left
        right = simulate(bind(circuit, omega))
        return float(abs(np.vdot(left, right)) ** 2)

    return fn


def sampled_fidelity_fn(
    circuit: Circuit, shots: int | float, noise: NoiseModel | None = None
) -> FidelityFn:
    """Compute-uncompute fidelity estimator at a fixed shot budget.

    Without noise the all-zeros probability of the doubled circuit equals
    the exact overlap, so the estimate is drawn from its binomial law with
    the left state cached; with noise the doubled circuit is simulated as
    one trajectory per call.
    """
    if noise is not None:
        def fn(theta: np.ndarray, omega: np.ndarray, rng: Rng) -> float:
            return fidelity_compute_uncompute(
                circuit, theta, omega, shots, rng, noise=noise
            ).value

        return fn

    exact = exact_fidelity_fn(circuit)
    if shots == math.inf:
        return exact

    def fn(theta: np.ndarray, omega: np.ndarray, rng: Rng) -> float:
        p0 = min(max(exact(theta, omega, rng), 0.0), 1.0)
        return float(rng.gen.binomial(int(shots), p0)) / int(shots)

    return fn


def exact_energy_fn(circuit: Circuit, h: PauliSum) -> EnergyFn:
    def fn(theta: np.ndarray, rng: Rng) -> float:
        return expectation_exact(simulate(bind(circuit, theta)), h)

    return fn


def sampled_energy_fn(
    circuit: Circuit,
    h: PauliSum,
    shots: int | float,
    noise: NoiseModel | None = None,
) -> EnergyFn:
    def fn(theta: np.ndarray, rng: Rng) -> float:
        return expectation_sampled(bind(circuit, theta), h, shots, rng, noise).value

    return fn


def sample_qgt(
    circuit: Circuit,
    theta: Sequence[float],
    cfg: SamplerConfig,
    rng: Rng,
    fidelity_fn: FidelityFn | None = None,
) -> np.ndarray:
    """One rank<=2 QGT sample from four fidelity evaluations.

    Draws two Rademacher directions and evaluates the nested finite
    difference of the fidelity around theta.
    """
    theta = np.asarray(theta, dtype=float)
    if fidelity_fn is None:
        fidelity_fn = sampled_fidelity_fn(circuit, cfg.shots)
    eps = cfg.epsilon
    d1 = rng.rademacher(theta.size)
    d2 = rng.rademacher(theta.size)
    delta_f = (
        fidelity_fn(theta, theta + eps * (d1 + d2), rng)
        - fidelity_fn(theta, theta + eps * (d1 - d2), rng)
        - fidelity_fn(theta, theta + eps * (d2 - d1), rng)
        + fidelity_fn(theta, theta - eps * (d1 + d2), rng)
    )
    outer = (np.outer(d1, d2) + np.outer(d2, d1)) / 2.0
    return -0.5 * delta_f / (4.0 * eps * eps) * outer


def sample_evolution_gradient(
    circuit: Circuit,
    theta: Sequence[float],
    h: PauliSum | None,
    cfg: SamplerConfig,
    rng: Rng,
    energy_fn: EnergyFn | None = None,
) -> np.ndarray:
    """One evolution-gradient sample from two energy evaluations."""
    theta = np.asarray(theta, dtype=float)
    if energy_fn is None:
        if h is None:
            raise ValueError("need a Hamiltonian or an energy_fn")
        energy_fn = sampled_energy_fn(circuit, h, cfg.shots)
    eps = cfg.epsilon
    delta = rng.rademacher(theta.size)
    diff = energy_fn(theta + eps * delta, rng) - energy_fn(theta - eps * delta, rng)
    return -0.5 * diff / (2.0 * eps) * delta


def sample_batch(
    circuit: Circuit,
    theta: Sequence[float],
    h: PauliSum,
    cfg: SamplerConfig,
    rng: Rng,
    fidelity_fn: FidelityFn | None = None,
    energy_fn: EnergyFn | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Batch mean of ``cfg.n_samples`` QGT and gradient samples.

    Sample i draws from the derived child stream ``rng.child(i)``, so the
    batch reduces identically whether evaluated serially or in parallel.
    """
    samples = []
    for i in range(cfg.n_samples):
        child = rng.child(i)
        g = sample_qgt(circuit, theta, cfg, child.child(0), fidelity_fn)
        b = sample_evolution_gradient(
            circuit, theta, h, cfg, child.child(1), energy_fn
        )
        samples.append((g, b))
    return average_batch(samples)


def average_batch(
    samples: Sequence[tuple[np.ndarray, np.ndarray]]
) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic mean of (QGT, gradient) sample pairs."""
    if not samples:
        raise ValueError("cannot average an empty batch")
    g = np.mean([s[0] for s in samples], axis=0)
    b = np.mean([s[1] for s in samples], axis=0)
    return g, b


def update_momentum(
    state: EstimatorState, g_sample: np.ndarray, b_sample: np.ndarray
) -> EstimatorState:
    """Exponential-momentum blend of a new batch into the running estimate."""
    if state.mode != "momentum":
        raise ValueError("estimator is not in momentum mode")
    return replace(
        state,
        g_bar=state.tau1 * state.g_bar + (1.0 - state.tau1) * g_sample,
        b_bar=state.tau2 * state.b_bar + (1.0 - state.tau2) * b_sample,
        k=state.k + 1,
    )


def update_global_average(
    state: EstimatorState, g_sample: np.ndarray
) -> EstimatorState:
    """Fold a new batch into the all-time average of QGT estimates.

    After k updates the running matrix equals the arithmetic mean of the
    initializer and all k batch inputs.
    """
    if state.mode != "global_average":
        raise ValueError("estimator is not in global_average mode")
    step = state.k + 1
    g_bar = (step / (step + 1.0)) * state.g_bar + g_sample / (step + 1.0)
    return replace(state, g_bar=g_bar, k=state.k + 1)


def sampling_error(estimate: np.ndarray, exact: np.ndarray) -> float:
    """Entrywise l2 (Frobenius) distance between estimate and reference."""
    estimate = np.asarray(estimate, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if estimate.shape != exact.shape:
        raise ValueError("shapes do not match")
    return float(np.linalg.norm(estimate - exact))
