"""Statevector simulation, expectation values, fidelities, and noise.

States are contiguous complex ``numpy`` arrays of length 2^n with qubit 0
as the least-significant bit of the amplitude index; bitstrings are
printed most-significant qubit leftmost. Gate application mutates a
per-call amplitude buffer in place. Noise follows quantum-trajectory
semantics: one stochastic Pauli insertion pattern per ``simulate`` call.

Shot-based operations accept ``shots=math.inf`` ("exact-probability
mode") to use exact Born probabilities instead of sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .circuits import Circuit, Gate, bind, compose, inverse
from .pauli import MeasurementBasis, PauliString, PauliSum, group_commuting_bases

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

_FIXED_1Q = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "H": np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=complex),
}

# diagonal 1q gates: (factor on |0>, factor on |1>)
_DIAG_1Q = {
    "Z": (1.0, -1.0),
    "S": (1.0, 1.0j),
    "SDG": (1.0, -1.0j),
}


class Rng:
    """Counter-based, splittable random stream (Philox).

    The same (seed, child path) always yields the same stream, so batch
    workloads can derive one child per task index and produce identical
    results whether executed serially or in parallel.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = _path
        self.gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=self._path))
        )

    def child(self, index: int) -> "Rng":
        return Rng(self.seed, self._path + (int(index),))

    def rademacher(self, size: int) -> np.ndarray:
        return 1.0 - 2.0 * self.gen.integers(0, 2, size=size).astype(float)


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic noise: per-qubit readout flips and per-CX Pauli errors.

    ``readout[q] = (p_0to1, p_1to0)``; ``cx_pauli_error`` is the
    probability of inserting a uniformly random non-identity two-qubit
    Pauli after each CX.
    """

    readout: tuple[tuple[float, float], ...] | None = None
    cx_pauli_error: float = 0.0

    def __post_init__(self) -> None:
        probs = [self.cx_pauli_error]
        if self.readout is not None:
            probs += [p for pair in self.readout for p in pair]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("noise probabilities must lie in [0, 1]")

    @classmethod
    def uniform_readout(
        cls, n: int, p01: float, p10: float | None = None, cx_pauli_error: float = 0.0
    ) -> "NoiseModel":
        p10 = p01 if p10 is None else p10
        return cls(tuple((p01, p10) for _ in range(n)), cx_pauli_error)


@dataclass(frozen=True, eq=False)
class ShotResult:
    """Measurement counts keyed by bitstring (MSB leftmost)."""

    counts: dict[str, int]
    shots: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to the shot total")


class SampledValue(NamedTuple):
    value: float
    circuits_run: int
    shots_used: int


# ---------------------------------------------------------------------------
# gate application (in place on a flat complex buffer)


def _apply_1q(state: np.ndarray, mat: np.ndarray, q: int) -> None:
    v = state.reshape(-1, 2, 1 << q)
    top = mat[0, 0] * v[:, 0] + mat[0, 1] * v[:, 1]
    bot = mat[1, 0] * v[:, 0] + mat[1, 1] * v[:, 1]
    v[:, 0] = top
    v[:, 1] = bot


def _apply_diag_1q(state: np.ndarray, d0: complex, d1: complex, q: int) -> None:
    v = state.reshape(-1, 2, 1 << q)
    if d0 != 1.0:
        v[:, 0] *= d0
    v[:, 1] *= d1


def _apply_x(state: np.ndarray, q: int) -> None:
    v = state.reshape(-1, 2, 1 << q)
    tmp = v[:, 0].copy()
    v[:, 0] = v[:, 1]
    v[:, 1] = tmp


def _pair_view(state: np.ndarray, a: int, b: int) -> np.ndarray:
    """Reshape so axes 1 and 3 are the bits of qubits a > b."""
    return state.reshape(-1, 2, 1 << (a - b - 1), 2, 1 << b)


def _apply_cx(state: np.ndarray, control: int, target: int) -> None:
    hi, lo = (control, target) if control > target else (target, control)
    v = _pair_view(state, hi, lo)
    if control == hi:
        tmp = v[:, 1, :, 0].copy()
        v[:, 1, :, 0] = v[:, 1, :, 1]
        v[:, 1, :, 1] = tmp
    else:
        tmp = v[:, 0, :, 1].copy()
        v[:, 0, :, 1] = v[:, 1, :, 1]
        v[:, 1, :, 1] = tmp


def _apply_rzz(state: np.ndarray, a: int, b: int, angle: float) -> None:
    hi, lo = (a, b) if a > b else (b, a)
    v = _pair_view(state, hi, lo)
    even = np.exp(-0.5j * angle)
    odd = np.exp(0.5j * angle)
    v[:, 0, :, 0] *= even
    v[:, 1, :, 1] *= even
    v[:, 0, :, 1] *= odd
    v[:, 1, :, 0] *= odd


def _rotation_matrix(kind: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    raise ValueError(f"no rotation matrix for {kind}")


def apply_gate(state: np.ndarray, gate: Gate) -> None:
    """Apply one bound gate in place."""
    kind = gate.kind
    if kind == "CX":
        _apply_cx(state, *gate.qubits)
    elif kind == "RZZ":
        _apply_rzz(state, *gate.qubits, gate.angle)
    elif kind == "RZ":
        phase = np.exp(0.5j * gate.angle)
        _apply_diag_1q(state, np.conj(phase), phase, gate.qubits[0])
    elif kind in ("RX", "RY"):
        _apply_1q(state, _rotation_matrix(kind, gate.angle), gate.qubits[0])
    elif kind == "X":
        _apply_x(state, gate.qubits[0])
    elif kind in _DIAG_1Q:
        d0, d1 = _DIAG_1Q[kind]
        _apply_diag_1q(state, d0, d1, gate.qubits[0])
    else:
        _apply_1q(state, _FIXED_1Q[kind], gate.qubits[0])


_PAULI_NAMES = ("I", "X", "Y", "Z")


def _apply_pauli_char(state: np.ndarray, name: str, q: int) -> None:
    if name == "X":
        _apply_x(state, q)
    elif name == "Y":
        _apply_1q(state, _FIXED_1Q["Y"], q)
    elif name == "Z":
        _apply_diag_1q(state, 1.0, -1.0, q)


def simulate(
    circuit: Circuit, noise: NoiseModel | None = None, rng: Rng | None = None
) -> np.ndarray:
    """Run a bound circuit on |0...0> and return the normalized state.

    With ``noise.cx_pauli_error > 0`` an rng is required and one stochastic
    Pauli-error pattern is sampled (a single trajectory per call).
    """
    if not circuit.is_bound:
        raise ValueError("simulate requires a bound circuit")
    inject = noise is not None and noise.cx_pauli_error > 0.0
    if inject and rng is None:
        raise ValueError("Pauli-error trajectories require an rng")
    state = np.zeros(1 << circuit.n_qubits, dtype=complex)
    state[0] = 1.0
    for gate in circuit.gates:
        apply_gate(state, gate)
        if inject and gate.kind == "CX" and rng.gen.random() < noise.cx_pauli_error:
            pair = int(rng.gen.integers(1, 16))
            _apply_pauli_char(state, _PAULI_NAMES[pair // 4], gate.qubits[0])
            _apply_pauli_char(state, _PAULI_NAMES[pair % 4], gate.qubits[1])
    state /= np.linalg.norm(state)
    return state


# ---------------------------------------------------------------------------
# Pauli action and exact expectation values


def apply_pauli(string: PauliString, state: np.ndarray) -> np.ndarray:
    """Return P|state> using the bitmask action (no dense matrices)."""
    n = string.n_qubits
    if state.shape != (1 << n,):
        raise ValueError("state dimension does not match the Pauli string")
    indices = np.arange(1 << n, dtype=np.uint64)
    signs = 1.0 - 2.0 * (
        np.bitwise_count(indices & np.uint64(string.z_mask)) & 1
    ).astype(float)
    n_y = int(string.x_mask & string.z_mask).bit_count()
    out = np.empty_like(state)
    out[indices ^ np.uint64(string.x_mask)] = (1j**n_y) * signs * state
    return out


def apply_pauli_sum(h: PauliSum, state: np.ndarray) -> np.ndarray:
    """Return H|state> as a sum of Pauli-term actions."""
    out = np.zeros_like(state)
    for coeff, string in h.terms:
        out += coeff * apply_pauli(string, state)
    return out


def expectation_exact(state: np.ndarray, h: PauliSum) -> float:
    """<state|H|state>, checked real to numerical tolerance."""
    if state.shape != (1 << h.n_qubits,):
        raise ValueError("state dimension does not match the Hamiltonian")
    if h.is_diagonal:
        probs = np.abs(state) ** 2
        return float(probs @ h.diagonal())
    value = complex(np.vdot(state, apply_pauli_sum(h, state)))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value)):
        raise ValueError("expectation of a Hermitian sum must be real")
    return float(value.real)


# ---------------------------------------------------------------------------
# sampling


def _measurement_rotation(basis: MeasurementBasis) -> list[Gate]:
    gates = []
    for q, axis in enumerate(basis.single_qubit_rotations):
        if axis == "X":
            gates.append(Gate("H", (q,)))
        elif axis == "Y":
            gates.append(Gate("SDG", (q,)))
            gates.append(Gate("H", (q,)))
    return gates


def rotated_for_basis(circuit: Circuit, basis: MeasurementBasis) -> Circuit:
    """Append the single-qubit rotations that map the basis onto Z."""
    extra = tuple(_measurement_rotation(basis))
    if not extra:
        return circuit
    return Circuit(circuit.n_qubits, circuit.gates + extra, 0)


def _readout_flip_indices(
    indices: np.ndarray, n: int, noise: NoiseModel, rng: Rng
) -> np.ndarray:
    p01 = np.array([pair[0] for pair in noise.readout])
    p10 = np.array([pair[1] for pair in noise.readout])
    bits = (indices[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
    flip_prob = np.where(bits == 0, p01[None, :], p10[None, :])
    flips = rng.gen.random(bits.shape) < flip_prob
    flipped = bits.astype(np.uint64) ^ flips.astype(np.uint64)
    return flipped @ (np.uint64(1) << np.arange(n, dtype=np.uint64))


def _readout_channel_probs(probs: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Exact action of the readout channel on a Born distribution."""
    out = probs.astype(float).copy()
    for q, (p01, p10) in enumerate(noise.readout):
        v = out.reshape(-1, 2, 1 << q)
        zero = (1.0 - p01) * v[:, 0] + p10 * v[:, 1]
        one = p01 * v[:, 0] + (1.0 - p10) * v[:, 1]
        v[:, 0] = zero
        v[:, 1] = one
    return out


_DEFAULT_TRAJECTORIES = 8


def sample_counts(
    circuit: Circuit,
    shots: int,
    rng: Rng,
    noise: NoiseModel | None = None,
    trajectories: int | None = None,
) -> ShotResult:
    """Draw Z-basis shots (with readout noise) from simulated trajectories.

    Ideally every shot sees its own stochastic Pauli-error pattern; as a
    cost compromise the shot budget is split evenly across
    ``min(shots, trajectories)`` independently simulated trajectories
    (default 8) whenever gate noise is active. Without gate noise a single
    simulation suffices.
    """
    n = circuit.n_qubits
    gate_noise = noise is not None and noise.cx_pauli_error > 0.0
    if trajectories is None:
        trajectories = _DEFAULT_TRAJECTORIES if gate_noise else 1
    trajectories = max(1, min(int(trajectories), shots))
    splits = [shots // trajectories] * trajectories
    for i in range(shots - sum(splits)):
        splits[i] += 1
    all_indices = []
    for t, split in enumerate(splits):
        traj_rng = rng.child(t) if trajectories > 1 else rng
        state = simulate(circuit, noise=noise, rng=traj_rng)
        probs = np.abs(state) ** 2
        probs /= probs.sum()
        per_index = traj_rng.gen.multinomial(split, probs)
        hit = np.flatnonzero(per_index)
        indices = np.repeat(hit.astype(np.uint64), per_index[hit])
        if noise is not None and noise.readout is not None:
            indices = _readout_flip_indices(indices, n, noise, traj_rng)
        all_indices.append(indices)
    values, counts = np.unique(np.concatenate(all_indices), return_counts=True)
    return ShotResult(
        {format(int(v), f"0{n}b"): int(c) for v, c in zip(values, counts)}, shots
    )


def parity_expectation(weights: dict[str, float], support_mask: int) -> float:
    """Weighted parity sum over bitstring weights for one Z-type term."""
    total = 0.0
    for bits, weight in weights.items():
        parity = (int(bits, 2) & support_mask).bit_count() & 1
        total += -weight if parity else weight
    return total


def _counts_to_weights(result: ShotResult) -> dict[str, float]:
    return {bits: count / result.shots for bits, count in result.counts.items()}


def _term_expectations_exact(
    probs: np.ndarray, h: PauliSum, members: Sequence[int]
) -> float:
    indices = np.arange(probs.size, dtype=np.uint64)
    total = 0.0
    for t in members:
        coeff, string = h.terms[t]
        parity = np.bitwise_count(indices & np.uint64(string.support_mask)) & 1
        total += coeff * float(probs @ (1.0 - 2.0 * parity.astype(float)))
    return total


def expectation_sampled(
    circuit: Circuit,
    h: PauliSum,
    shots: int | float,
    rng: Rng,
    noise: NoiseModel | None = None,
) -> SampledValue:
    """Estimate <H> by measuring each qubit-wise commuting basis with M shots.

    Exact-probability mode (``shots=math.inf``) replaces sampling by the
    exact Born distribution (readout noise is then applied as an exact
    channel on the probabilities).
    """
    if shots != math.inf and shots < 1:
        raise ValueError("need at least one shot per basis")
    bases = group_commuting_bases(h)
    value = 0.0
    for basis in bases:
        rotated = rotated_for_basis(circuit, basis)
        if shots == math.inf:
            state = simulate(rotated, noise=noise, rng=rng)
            probs = np.abs(state) ** 2
            if noise is not None and noise.readout is not None:
                probs = _readout_channel_probs(probs, noise)
            value += _term_expectations_exact(probs, h, basis.member_terms)
        else:
            result = sample_counts(rotated, int(shots), rng, noise=noise)
            weights = _counts_to_weights(result)
            for t in basis.member_terms:
                coeff, string = h.terms[t]
                value += coeff * parity_expectation(weights, string.support_mask)
    shots_used = 0 if shots == math.inf else len(bases) * int(shots)
    return SampledValue(value, len(bases), shots_used)


# ---------------------------------------------------------------------------
# fidelities


def fidelity_exact(
    circuit: Circuit, theta: Sequence[float], omega: Sequence[float]
) -> float:
    """|<phi(theta)|phi(omega)>|^2 from two statevector simulations."""
    a = simulate(bind(circuit, theta))
    b = simulate(bind(circuit, omega))
    return float(abs(np.vdot(a, b)) ** 2)


def _zero_outcome_probability(
    state: np.ndarray, noise: NoiseModel | None
) -> float:
    probs = np.abs(state) ** 2
    if noise is None or noise.readout is None:
        return float(probs[0])
    n = int(math.log2(probs.size))
    weight = np.ones_like(probs)
    for q, (p01, p10) in enumerate(noise.readout):
        v = weight.reshape(-1, 2, 1 << q)
        v[:, 0] *= 1.0 - p01
        v[:, 1] *= p10
    return float(probs @ weight)


def fidelity_compute_uncompute(
    circuit: Circuit,
    theta: Sequence[float],
    omega: Sequence[float],
    shots: int | float,
    rng: Rng | None = None,
    noise: NoiseModel | None = None,
) -> SampledValue:
    """Estimate fidelity as the all-zeros frequency of U^†(theta)U(omega)|0>.

    Runs the doubled circuit (a single trajectory when noisy) and draws the
    all-zeros count from its binomial law; ``shots=math.inf`` returns the
    exact outcome probability.
    """
    combined = compose(bind(circuit, omega), inverse(bind(circuit, theta)))
    state = simulate(combined, noise=noise, rng=rng)
    p0 = min(max(_zero_outcome_probability(state, noise), 0.0), 1.0)
    if shots == math.inf:
        return SampledValue(p0, 1, 0)
    if rng is None:
        raise ValueError("shot-based fidelity requires an rng")
    hits = int(rng.gen.binomial(int(shots), p0))
    return SampledValue(hits / int(shots), 1, int(shots))


def fubini_study_distance(
    circuit: Circuit, theta: Sequence[float], omega: Sequence[float]
) -> float:
    """Squared Fubini-Study distance arccos^2(sqrt(F))."""
    root = math.sqrt(min(max(fidelity_exact(circuit, theta, omega), 0.0), 1.0))
    return math.acos(min(root, 1.0)) ** 2
