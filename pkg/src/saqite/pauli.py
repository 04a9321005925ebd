"""Pauli-string algebra and Hamiltonian builders for the supported model systems.

Conventions used throughout the package:

* qubit 0 is the least-significant bit of a computational-basis index,
* text labels (e.g. ``ZZII``) list the most-significant qubit leftmost,
* Pauli strings are stored as an (x-mask, z-mask) bit pair with
  ``(0,0)=I, (1,0)=X, (1,1)=Y, (0,1)=Z`` per qubit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

_CHAR_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_CHAR = {bits: char for char, bits in _CHAR_TO_BITS.items()}

_DENSE_QUBIT_LIMIT = 12

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli operator stored as an (x-mask, z-mask) pair."""

    n_qubits: int
    x_mask: int
    z_mask: int

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("PauliString needs at least one qubit")
        top = 1 << self.n_qubits
        if not (0 <= self.x_mask < top and 0 <= self.z_mask < top):
            raise ValueError("bitmask exceeds qubit count")

    @classmethod
    def from_ops(cls, ops: Sequence[str]) -> "PauliString":
        """Build from a per-qubit sequence, index = qubit number."""
        x = z = 0
        for q, char in enumerate(ops):
            try:
                xb, zb = _CHAR_TO_BITS[char]
            except KeyError:
                raise ValueError(f"unknown Pauli op {char!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(ops), x, z)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a text label, most-significant qubit leftmost."""
        return cls.from_ops(label[::-1])

    @property
    def ops(self) -> tuple[str, ...]:
        """Per-qubit operators, index = qubit number."""
        return tuple(
            _BITS_TO_CHAR[(self.x_mask >> q) & 1, (self.z_mask >> q) & 1]
            for q in range(self.n_qubits)
        )

    @property
    def label(self) -> str:
        return "".join(reversed(self.ops))

    @property
    def support_mask(self) -> int:
        """Bitmask of qubits on which the operator acts non-trivially."""
        return self.x_mask | self.z_mask

    @property
    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    def to_matrix(self) -> np.ndarray:
        """Dense matrix; restricted to small qubit counts (oracle use only)."""
        if self.n_qubits > _DENSE_QUBIT_LIMIT:
            raise ValueError(f"dense matrices limited to {_DENSE_QUBIT_LIMIT} qubits")
        m = np.array([[1.0 + 0j]])
        for q in range(self.n_qubits - 1, -1, -1):
            m = np.kron(m, _PAULI_MATRICES[self.ops[q]])
        return m

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings (a Hermitian operator)."""

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self) -> None:
        seen = set()
        for _, string in self.terms:
            if string.n_qubits != self.n_qubits:
                raise ValueError("all terms must share the qubit count")
            key = (string.x_mask, string.z_mask)
            if key in seen:
                raise ValueError(f"duplicate term {string.label}; merge coefficients")
            seen.add(key)

    @classmethod
    def from_terms(
        cls, n_qubits: int, terms: Iterable[tuple[float, PauliString]]
    ) -> "PauliSum":
        """Build with duplicate strings merged by coefficient addition."""
        merged: dict[tuple[int, int], tuple[float, PauliString]] = {}
        for coeff, string in terms:
            key = (string.x_mask, string.z_mask)
            if key in merged:
                merged[key] = (merged[key][0] + coeff, string)
            else:
                merged[key] = (float(coeff), string)
        return cls(n_qubits, tuple(merged.values()))

    @property
    def is_diagonal(self) -> bool:
        return all(s.is_diagonal for _, s in self.terms)

    def to_matrix(self) -> np.ndarray:
        if self.n_qubits > _DENSE_QUBIT_LIMIT:
            raise ValueError(f"dense matrices limited to {_DENSE_QUBIT_LIMIT} qubits")
        dim = 1 << self.n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for coeff, string in self.terms:
            m += coeff * string.to_matrix()
        return m

    def diagonal(self) -> np.ndarray:
        """Energy of every computational basis state; diagonal sums only."""
        if not self.is_diagonal:
            raise ValueError("diagonal() requires Z/I-only terms")
        return _diagonal(self)

    def to_text(self) -> str:
        """Line-oriented serialization: ``<coefficient> <label>`` per term."""
        return "\n".join(f"{coeff!r} {string.label}" for coeff, string in self.terms)

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        terms = []
        n_qubits = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            coeff_str, label = line.split()
            string = PauliString.from_label(label)
            if n_qubits is None:
                n_qubits = string.n_qubits
            terms.append((float(coeff_str), string))
        if n_qubits is None:
            raise ValueError("empty Pauli sum serialization")
        return cls.from_terms(n_qubits, terms)


@lru_cache(maxsize=64)
def _diagonal(h: PauliSum) -> np.ndarray:
    indices = np.arange(1 << h.n_qubits, dtype=np.uint64)
    diag = np.zeros(indices.shape, dtype=float)
    for coeff, string in h.terms:
        parity = np.bitwise_count(indices & np.uint64(string.z_mask)) & 1
        diag += coeff * (1.0 - 2.0 * parity.astype(float))
    diag.setflags(write=False)
    return diag


@dataclass(frozen=True)
class MeasurementBasis:
    """A group of qubit-wise commuting terms measurable with one circuit.

    ``single_qubit_rotations[q]`` names the Pauli axis measured on qubit q;
    qubits untouched by every member term default to Z.
    """

    single_qubit_rotations: tuple[str, ...]
    member_terms: tuple[int, ...]


def _single_z(n: int, q: int) -> PauliString:
    return PauliString(n, 0, 1 << q)


def _single_x(n: int, q: int) -> PauliString:
    return PauliString(n, 1 << q, 0)


def _zz(n: int, i: int, j: int) -> PauliString:
    return PauliString(n, 0, (1 << i) | (1 << j))


def build_ising_chain(n: int, J: float, h: float) -> PauliSum:
    """Transverse-field Ising chain: J * sum_i Z_i Z_{i+1} + h * sum_i X_i."""
    if n < 1:
        raise ValueError("chain needs at least one qubit")
    terms = [(J, _zz(n, i, i + 1)) for i in range(n - 1)]
    terms += [(h, _single_x(n, i)) for i in range(n)]
    return PauliSum.from_terms(n, terms)


def build_ising_graph(
    edges: Sequence[tuple[int, int]], n: int, J: float, h: float
) -> PauliSum:
    """Ising model with ZZ couplings on an arbitrary edge list plus X fields."""
    if n < 1:
        raise ValueError("graph needs at least one qubit")
    seen = set()
    terms = []
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid edge ({i}, {j}) for {n} qubits")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        terms.append((J, _zz(n, i, j)))
    terms += [(h, _single_x(n, i)) for i in range(n)]
    return PauliSum.from_terms(n, terms)


def build_maxcut_circle(n: int, w1: float, w2: float) -> PauliSum:
    """Circle-graph cut Hamiltonian with nearest and third-neighbor couplings.

    w1 * sum_i Z_i Z_{(i+1) mod n}  +  w2 * sum_i Z_i Z_{(i+3) mod n};
    index collisions for small n are merged by coefficient addition.
    """
    if n < 4:
        raise ValueError("circle graph needs at least 4 nodes")
    terms = [(w1, _zz(n, i, (i + 1) % n)) for i in range(n)]
    terms += [(w2, _zz(n, i, (i + 3) % n)) for i in range(n)]
    return PauliSum.from_terms(n, terms)


@lru_cache(maxsize=64)
def group_commuting_bases(h: PauliSum) -> tuple[MeasurementBasis, ...]:
    """Greedy first-fit grouping of terms into qubit-wise commuting bases."""
    if not h.terms:
        raise ValueError("cannot group an empty Pauli sum")
    assignments: list[dict[int, str]] = []  # per basis: qubit -> axis
    members: list[list[int]] = []
    for index, (_, string) in enumerate(h.terms):
        ops = string.ops
        placed = False
        for axes, group in zip(assignments, members):
            if all(
                ops[q] == "I" or axes.get(q, ops[q]) == ops[q]
                for q in range(h.n_qubits)
            ):
                for q in range(h.n_qubits):
                    if ops[q] != "I":
                        axes[q] = ops[q]
                group.append(index)
                placed = True
                break
        if not placed:
            assignments.append(
                {q: ops[q] for q in range(h.n_qubits) if ops[q] != "I"}
            )
            members.append([index])
    return tuple(
        MeasurementBasis(
            tuple(axes.get(q, "Z") for q in range(h.n_qubits)),
            tuple(group),
        )
        for axes, group in zip(assignments, members)
    )


def brute_force_minimum(h: PauliSum, atol: float = 1e-9) -> tuple[float, list[str]]:
    """Minimum energy and all minimizing bitstrings of a diagonal Hamiltonian.

    Exhaustive over all 2^n computational basis states; bitstrings are
    rendered most-significant qubit leftmost.
    """
    diag = h.diagonal()
    minimum = float(diag.min())
    winners = np.flatnonzero(diag <= minimum + atol)
    return minimum, [format(int(i), f"0{h.n_qubits}b") for i in winners]
