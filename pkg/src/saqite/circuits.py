"""Parametric circuit IR, ansatz builders, and circuit transforms.

A :class:`Gate` carries either a fixed ``angle`` or a symbolic parameter
index (with an optional multiplier applied at bind time). Rotation angles
follow the convention ``R_P(theta) = exp(-i * theta * P / 2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .pauli import PauliSum

ROTATION_KINDS = frozenset({"RX", "RY", "RZ", "RZZ"})
FIXED_KINDS = frozenset({"H", "X", "Y", "Z", "S", "SDG", "CX"})
TWO_QUBIT_KINDS = frozenset({"CX", "RZZ"})

_ADJOINT_FIXED = {"S": "SDG", "SDG": "S"}


@dataclass(frozen=True)
class Gate:
    """One circuit operation.

    Rotation kinds carry either a fixed ``angle`` or a parameter index
    (bound angle = ``scale * theta[param]``); fixed kinds carry neither.
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    param: int | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind in ROTATION_KINDS:
            if (self.angle is None) == (self.param is None):
                raise ValueError(f"{self.kind} needs exactly one of angle/param")
        elif self.kind in FIXED_KINDS:
            if self.angle is not None or self.param is not None:
                raise ValueError(f"{self.kind} carries no angle")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        expected = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.qubits) != expected:
            raise ValueError(f"{self.kind} acts on {expected} qubit(s)")
        if expected == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"{self.kind} needs two distinct qubits")

    @property
    def is_bound(self) -> bool:
        return self.param is None


@dataclass(frozen=True)
class Circuit:
    """Ordered gate sequence on ``n_qubits`` with ``n_params`` free angles."""

    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        used = set()
        for gate in self.gates:
            if any(not 0 <= q < self.n_qubits for q in gate.qubits):
                raise ValueError(f"gate {gate.kind} addresses a missing qubit")
            if gate.param is not None:
                used.add(gate.param)
        if used != set(range(self.n_params)):
            raise ValueError("parameter indices must cover 0..n_params-1")

    @property
    def is_bound(self) -> bool:
        return self.n_params == 0

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def dump(self) -> str:
        """Diagnostic dump, one gate per line: ``KIND q0[,q1] [angle|p<i>]``."""
        lines = []
        for g in self.gates:
            entry = f"{g.kind} {','.join(map(str, g.qubits))}"
            if g.param is not None:
                ref = f"p{g.param}" if g.scale == 1.0 else f"{g.scale!r}*p{g.param}"
                entry += f" {ref}"
            elif g.angle is not None:
                entry += f" {g.angle!r}"
            lines.append(entry)
        return "\n".join(lines)


def build_hea(
    n: int, L: int, entangler: Sequence[tuple[int, int]] | None = None
) -> Circuit:
    """Hardware-efficient ansatz: L+1 RY+RZ rotation layers, L CX layers.

    Every rotation gets a fresh parameter in emission order (RY layer then
    RZ layer, qubit-major), so n_params = 2n(L+1). The default chain
    entangler emits even-index pairs before odd-index pairs, which packs
    each entangling layer into CX depth 2.
    """
    if n < 1 or L < 0:
        raise ValueError("need n >= 1 and L >= 0")
    if entangler is None:
        pairs = [(i, i + 1) for i in range(0, n - 1, 2)]
        pairs += [(i, i + 1) for i in range(1, n - 1, 2)]
    else:
        pairs = [tuple(p) for p in entangler]
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid entangler pair ({i}, {j})")

    gates: list[Gate] = []
    param = itertools.count()
    for layer in range(L + 1):
        for q in range(n):
            gates.append(Gate("RY", (q,), param=next(param)))
        for q in range(n):
            gates.append(Gate("RZ", (q,), param=next(param)))
        if layer < L:
            gates.extend(Gate("CX", (i, j)) for i, j in pairs)
    return Circuit(n, tuple(gates), 2 * n * (L + 1))


def build_qaoa(h_cost: PauliSum, r: int) -> Circuit:
    """Alternating-operator ansatz for a diagonal cost Hamiltonian.

    Prepares the uniform superposition, then r blocks of cost rotations
    (RZZ(2*gamma_p*w) per ZZ term, RZ for single-Z) followed by an
    RX(2*beta_p) mixer layer. Parameters are ordered
    (gamma_1, beta_1, ..., gamma_r, beta_r).
    """
    if r < 0:
        raise ValueError("need r >= 0")
    n = h_cost.n_qubits
    gates: list[Gate] = [Gate("H", (q,)) for q in range(n)]
    for p in range(r):
        gamma, beta = 2 * p, 2 * p + 1
        for coeff, string in h_cost.terms:
            if not string.is_diagonal:
                raise ValueError(
                    f"cost term {string.label} is not diagonal; QAOA needs Z/ZZ terms"
                )
            support = [q for q in range(n) if (string.z_mask >> q) & 1]
            if len(support) == 2:
                gates.append(
                    Gate("RZZ", tuple(support), param=gamma, scale=2.0 * coeff)
                )
            elif len(support) == 1:
                gates.append(Gate("RZ", (support[0],), param=gamma, scale=2.0 * coeff))
            # identity terms shift the energy only; no gate
        gates.extend(Gate("RX", (q,), param=beta, scale=2.0) for q in range(n))
    return Circuit(n, tuple(gates), 2 * r)


def bind(circuit: Circuit, values: Sequence[float]) -> Circuit:
    """Substitute parameter values; returns a fully bound circuit."""
    values = np.asarray(values, dtype=float)
    if values.shape != (circuit.n_params,):
        raise ValueError(
            f"expected {circuit.n_params} parameter values, got {values.shape}"
        )
    gates = tuple(
        g
        if g.param is None
        else replace(g, angle=g.scale * float(values[g.param]), param=None, scale=1.0)
        for g in circuit.gates
    )
    return Circuit(circuit.n_qubits, gates, 0)


def inverse(circuit: Circuit) -> Circuit:
    """Adjoint circuit: reversed order, each gate adjointed."""
    if not circuit.is_bound:
        raise ValueError("inverse requires a bound circuit")
    gates = []
    for g in reversed(circuit.gates):
        if g.kind in ROTATION_KINDS:
            gates.append(replace(g, angle=-g.angle))
        else:
            gates.append(replace(g, kind=_ADJOINT_FIXED.get(g.kind, g.kind)))
    return Circuit(circuit.n_qubits, tuple(gates), 0)


def compose(first: Circuit, second: Circuit) -> Circuit:
    """Concatenate two bound circuits on the same register."""
    if first.n_qubits != second.n_qubits:
        raise ValueError("qubit counts differ")
    if not (first.is_bound and second.is_bound):
        raise ValueError("compose requires bound circuits")
    return Circuit(first.n_qubits, first.gates + second.gates, 0)


def fold_cx(circuit: Circuit, m: int) -> Circuit:
    """Replace every CX by 2m+1 consecutive CX gates (noise amplification)."""
    if m < 0:
        raise ValueError("need m >= 0")
    if not circuit.is_bound:
        raise ValueError("fold_cx requires a bound circuit")
    gates: list[Gate] = []
    for g in circuit.gates:
        gates.extend([g] * (2 * m + 1) if g.kind == "CX" else [g])
    return Circuit(circuit.n_qubits, tuple(gates), 0)


def _cx_pauli_propagation() -> dict[tuple[str, str], tuple[str, str]]:
    """Conjugation table CX (P_c x P_t) CX = +/- (P'_c x P'_t), sign dropped."""
    paulis = {
        "I": np.eye(2, dtype=complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    # control = qubit 0 (least-significant index of the kron order below)
    cx = np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    )
    table = {}
    names = ("I", "X", "Y", "Z")
    for pc in names:
        for pt in names:
            conj = cx @ np.kron(paulis[pt], paulis[pc]) @ cx
            for qc in names:
                for qt in names:
                    target = np.kron(paulis[qt], paulis[qc])
                    for sign in (1, -1):
                        if np.allclose(conj, sign * target):
                            table[(pc, pt)] = (qc, qt)
    assert len(table) == 16
    return table


_TWIRL_TABLE = _cx_pauli_propagation()


def twirl_cx(circuit: Circuit, rng) -> Circuit:
    """Sandwich every CX between random Pauli pairs preserving its action.

    The pre pair is drawn uniformly from the 16 two-qubit Paulis; the post
    pair is the unique one with ``CX * pre = +/- post * CX``. Global signs
    are dropped (only expectation values are consumed downstream).
    """
    if not circuit.is_bound:
        raise ValueError("twirl_cx requires a bound circuit")
    names = ("I", "X", "Y", "Z")
    gates: list[Gate] = []
    for g in circuit.gates:
        if g.kind != "CX":
            gates.append(g)
            continue
        control, target = g.qubits
        pre = (names[rng.gen.integers(4)], names[rng.gen.integers(4)])
        post = _TWIRL_TABLE[pre]
        for name, q in zip(pre, (control, target)):
            if name != "I":
                gates.append(Gate(name, (q,)))
        gates.append(g)
        for name, q in zip(post, (control, target)):
            if name != "I":
                gates.append(Gate(name, (q,)))
    return Circuit(circuit.n_qubits, tuple(gates), 0)
