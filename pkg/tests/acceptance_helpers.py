"""Top-level worker functions for the acceptance suite's process pools."""

from __future__ import annotations

import math

import numpy as np

import saqite as sq
from saqite.backend import NoiseModel, Rng, expectation_exact, simulate
from saqite.circuits import bind, build_hea, build_qaoa
from saqite.evolve import (
    EvolutionConfig,
    integrated_infidelity,
    reference_taylor,
    saqite,
    subsample_states,
    varqite,
)
from saqite.gradients import SamplerConfig
from saqite.mitigate import CalibrationSet, ZneConfig, mitigated_energy
from saqite.optimize import (
    OptimizerConfig,
    qnspsa_minimize,
    saqite_minimize,
    spsa_minimize,
)

ISING_J, ISING_H = 0.5, -1.0
BENCH_T, BENCH_DT = 1.5, 0.01

# benchmark settings: n -> (shots, delta) for the exact-tensor driver and
# (shots, n_samples, tau1, tau2, delta) for the stochastic driver
VARQITE_SETTINGS = {4: (128, 0.05), 6: (400, 0.05), 8: (1024, 0.01), 10: (2048, 0.05)}
SAQITE_SETTINGS = {
    4: (128, 10, 0.99, 0.7, 0.05),
    6: (256, 20, 0.99, 0.9, 0.05),
    8: (512, 75, 0.99, 0.7, 0.05),
    10: (800, 250, 0.99, 0.7, 0.05),
}


def bench_layers(n: int) -> int:
    return math.ceil(math.log(n))


def _reference(h, n_steps):
    psi0 = np.zeros(1 << h.n_qubits, dtype=complex)
    psi0[0] = 1.0
    fine = reference_taylor(h, psi0, 1e-3, BENCH_T)
    return subsample_states(fine, 1e-3, BENCH_DT, n_steps)


def run_benchmark_seed(args):
    """One evolution benchmark run; returns (infidelity, total measurements)."""
    mode, n, seed = args
    h = sq.build_ising_chain(n, ISING_J, ISING_H)
    circuit = build_hea(n, bench_layers(n))
    if mode == "varqite":
        shots, delta = VARQITE_SETTINGS[n]
        cfg = EvolutionConfig(
            delta_t=BENCH_DT, total_time=BENCH_T, solver="stable_subspace",
            delta=delta, sampler=SamplerConfig(shots=shots), mode="varqite", seed=seed,
        )
        driver = varqite
    else:
        shots, n_samples, tau1, tau2, delta = SAQITE_SETTINGS[n]
        cfg = EvolutionConfig(
            delta_t=BENCH_DT, total_time=BENCH_T, solver="stable_subspace",
            delta=delta, sampler=SamplerConfig(n_samples=n_samples, shots=shots),
            tau1=tau1, tau2=tau2, mode="saqite", seed=seed,
        )
        driver = saqite
    reference = _reference(h, cfg.n_steps)
    result = driver(circuit, np.zeros(circuit.n_params), h, cfg, reference_states=reference)
    return integrated_infidelity(result), int(result.measurements_cumulative[-1])


def run_regularizer_seed(args):
    """Shared-seed solver comparison at n=8; returns the two infidelities."""
    seed, delta = args
    n = 8
    h = sq.build_ising_chain(n, ISING_J, ISING_H)
    circuit = build_hea(n, bench_layers(n))
    reference = None
    out = {}
    for solver in ("stable_subspace", "diag_shift"):
        cfg = EvolutionConfig(
            delta_t=BENCH_DT, total_time=BENCH_T, solver=solver, delta=delta,
            sampler=SamplerConfig(n_samples=25, shots=512),
            tau1=0.99, tau2=0.7, mode="saqite", seed=seed,
        )
        if reference is None:
            reference = _reference(h, cfg.n_steps)
        result = saqite(
            circuit, np.zeros(circuit.n_params), h, cfg, reference_states=reference
        )
        out[solver] = integrated_infidelity(result)
    return out["stable_subspace"], out["diag_shift"]


MAXCUT_THETA0 = (1e-3, 1e-2, 1e-3, 1e-2)


def run_optimizer_seed(args):
    """All three optimizers on the 15-node problem under one seed."""
    seed, iters_sa, iters_qn, iters_sp = args
    h = sq.build_maxcut_circle(15, 20.0, -20.0)
    circuit = build_qaoa(h, 2)
    _, optimal = sq.brute_force_minimum(h)
    theta0 = np.array(MAXCUT_THETA0)
    sa = saqite_minimize(circuit, h, theta0, OptimizerConfig(
        eta=1e-3, epsilon=1e-2, shots=8000, iters=iters_sa, n0=10, decay=0.9,
        tau1=0.99, tau2=0.0, delta=100.0, seed=seed), optimal=optimal)
    qn = qnspsa_minimize(circuit, h, theta0, OptimizerConfig(
        eta=1e-3, epsilon=1e-2, shots=8000, iters=iters_qn, delta=100.0, seed=seed),
        optimal=optimal)
    sp = spsa_minimize(circuit, h, theta0, OptimizerConfig(
        eta=5e-7, epsilon=1e-2, shots=8000, iters=iters_sp, seed=seed), optimal=optimal)

    def milestone(log):
        hit = np.flatnonzero(log.p_optimal >= 0.01)
        return (
            int(log.measurements_cumulative[hit[0]])
            if hit.size
            else int(log.measurements_cumulative[-1]) + 1  # not reached in budget
        )

    def energy_at(log, budget):
        index = np.searchsorted(log.measurements_cumulative, budget, side="right") - 1
        return float(log.energies[max(index, 0)])

    budget = 0.1 * min(sa.measurements_cumulative[-1], qn.measurements_cumulative[-1])
    return (
        milestone(sa), milestone(qn), milestone(sp),
        energy_at(sa, budget), energy_at(qn, budget),
    )


def zne_test_circuit():
    """Deep 5-qubit circuit bound at exactly evolved low-energy angles."""
    n, layers = 5, 14
    h = sq.build_ising_chain(n, ISING_J, ISING_H)
    circuit = build_hea(n, layers)
    cfg = EvolutionConfig(
        delta_t=0.05, total_time=1.0, solver="stable_subspace", delta=0.05,
        sampler=SamplerConfig(shots=math.inf), mode="varqite",
    )
    result = varqite(circuit, np.zeros(circuit.n_params), h, cfg)
    return h, bind(circuit, result.thetas[-1])


def run_zne_seed(args):
    """One mitigated-energy run; returns |E0 - E*| and |E(1) - E*|."""
    seed, theta = args
    n, layers = 5, 14
    h = sq.build_ising_chain(n, ISING_J, ISING_H)
    bound = bind(build_hea(n, layers), np.asarray(theta))
    exact = expectation_exact(simulate(bound), h)
    noise = NoiseModel.uniform_readout(n, 0.02, 0.02, cx_pauli_error=0.01)
    calib = CalibrationSet.from_noise_model(noise, n)
    zcfg = ZneConfig(fold_levels=(1, 3, 5), n_twirls=25, shots=1000)
    report = mitigated_energy(bound, h, noise, zcfg, calib, Rng(seed))
    return abs(report.e0 - exact), abs(report.zeta_energies[0] - exact)
