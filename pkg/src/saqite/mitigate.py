"""Simulated error-mitigation pipeline.

Readout errors are inverted on the observed-bitstring subspace with a
truncated, column-renormalized transfer matrix built from per-qubit
calibration matrices. Gate errors are mitigated by zero-noise
extrapolation: every CX is sandwiched in random logical-identity Pauli
pairs, folded to odd repetition counts, and the mitigated energies are
extrapolated to zero folding with an exponential model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backend import (
    NoiseModel,
    Rng,
    ShotResult,
    parity_expectation,
    rotated_for_basis,
    sample_counts,
)
from .circuits import Circuit, fold_cx, twirl_cx
from .pauli import PauliSum, group_commuting_bases


class CalibrationError(ValueError):
    """Raised when the truncated transfer matrix cannot be inverted."""


@dataclass(frozen=True, eq=False)
class CalibrationSet:
    """Per-qubit 2x2 column-stochastic matrices C[measured, true]."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        for c in self.matrices:
            if c.shape != (2, 2) or np.any(c < 0) or np.any(c > 1):
                raise ValueError("calibration matrices must be 2x2 with [0,1] entries")
            if not np.allclose(c.sum(axis=0), 1.0, atol=1e-9):
                raise ValueError("calibration matrix columns must sum to 1")

    @classmethod
    def from_noise_model(cls, noise: NoiseModel, n: int) -> "CalibrationSet":
        """Ground-truth calibration matching the simulated readout flips."""
        readout = noise.readout or tuple((0.0, 0.0) for _ in range(n))
        if len(readout) != n:
            raise ValueError("noise model does not cover all qubits")
        mats = []
        for p01, p10 in readout:
            mats.append(np.array([[1.0 - p01, p10], [p01, 1.0 - p10]]))
        return cls(tuple(mats))

    @classmethod
    def identity(cls, n: int) -> "CalibrationSet":
        return cls(tuple(np.eye(2) for _ in range(n)))


@dataclass(frozen=True, eq=False)
class QuasiDistribution:
    """Bitstring weights summing to one; entries may be negative."""

    weights: dict[str, float]

    def __post_init__(self) -> None:
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"quasi-probabilities sum to {total!r}, expected 1")


@dataclass(frozen=True)
class ZneConfig:
    """Fold levels, twirl count, and shots for one mitigated energy."""

    fold_levels: tuple[int, ...] = (1, 3, 5)
    n_twirls: int = 25
    shots: int = 1000

    def __post_init__(self) -> None:
        levels = self.fold_levels
        if len(levels) < 1 or any(z % 2 == 0 or z < 1 for z in levels):
            raise ValueError("fold levels must be odd positive integers")
        if any(a >= b for a, b in zip(levels, levels[1:])):
            raise ValueError("fold levels must be strictly ascending")
        if self.n_twirls < 1:
            raise ValueError("need at least one twirl instance")
        if self.shots < 1:
            raise ValueError("need at least one shot")


@dataclass(frozen=True, eq=False)
class ZneFit:
    """Extrapolated zero-noise value and the model behind it.

    On the exponential path the model is ``E(z) = a + b*exp(c*z)``; when
    the points are degenerate or non-monotone a linear fit in z is used
    instead (``a`` intercept, ``b`` slope, ``c`` None) and flagged.
    """

    e0: float
    a: float
    b: float
    c: float | None
    fallback: bool


@dataclass(frozen=True, eq=False)
class MitigationReport:
    """Per-fold-level energies and the extrapolation result."""

    e0: float
    fold_levels: tuple[int, ...]
    zeta_energies: tuple[float, ...]
    fit: ZneFit
    n_twirls: int

    def to_json_dict(self) -> dict:
        return {
            "e0": self.e0,
            "fold_levels": list(self.fold_levels),
            "zeta_energies": list(self.zeta_energies),
            "fit": {
                "a": self.fit.a,
                "b": self.fit.b,
                "c": self.fit.c,
                "fallback": self.fit.fallback,
            },
            "n_twirls": self.n_twirls,
        }


def m3_mitigate(counts: ShotResult, calib: CalibrationSet) -> QuasiDistribution:
    """Invert readout errors on the subspace of observed bitstrings.

    Builds the transfer matrix restricted to the observed bitstrings from
    products of per-qubit calibration entries, renormalizes its columns on
    that subspace, and solves for quasi-probabilities (which therefore sum
    to exactly the observed total of 1).
    """
    if not counts.counts:
        raise ValueError("cannot mitigate an empty count map")
    observed = sorted(counts.counts)
    n = len(observed[0])
    p = np.array([counts.counts[b] for b in observed], dtype=float) / counts.shots
    bits = np.array([[int(b[n - 1 - q]) for q in range(n)] for b in observed])
    transfer = np.ones((len(observed), len(observed)))
    for q in range(n):
        c = calib.matrices[q]
        transfer *= c[np.ix_(bits[:, q], bits[:, q])]
    colsum = transfer.sum(axis=0)
    if np.any(colsum <= 0):
        raise CalibrationError("transfer matrix has an empty column")
    transfer = transfer / colsum
    try:
        quasi = np.linalg.solve(transfer, p)
    except np.linalg.LinAlgError as exc:
        raise CalibrationError("truncated transfer matrix is singular") from exc
    quasi /= quasi.sum()  # exact 1 despite rounding
    return QuasiDistribution(dict(zip(observed, quasi.tolist())))


def zne_extrapolate(points: Sequence[tuple[float, float]]) -> ZneFit:
    """Extrapolate fold-level energies to zero folding.

    Exactly three equally spaced levels admit the closed-form exponential
    solve; degenerate or non-monotone energies (and any other grid) fall
    back to a linear least-squares extrapolation, flagged in the result.
    """
    if len(points) < 3:
        raise ValueError("need at least three fold levels")
    pts = sorted((float(z), float(e)) for z, e in points)
    zs = np.array([z for z, _ in pts])
    es = np.array([e for _, e in pts])
    if len(set(zs.tolist())) != len(zs):
        raise ValueError("fold levels must be distinct")

    closed_form = len(pts) == 3 and math.isclose(zs[1] - zs[0], zs[2] - zs[1])
    if closed_form:
        spacing = zs[1] - zs[0]
        d1 = es[1] - es[0]
        d2 = es[2] - es[1]
        scale = max(1.0, float(np.abs(es).max()))
        if abs(d1) > 1e-14 * scale:
            ratio = d2 / d1
            if ratio > 0 and abs(ratio - 1.0) > 1e-12:
                c = math.log(ratio) / spacing
                b = d1 / (math.exp(c * zs[0]) * (ratio - 1.0))
                a = es[0] - b * math.exp(c * zs[0])
                return ZneFit(a + b, a, b, c, fallback=False)
    slope, intercept = np.polyfit(zs, es, 1)
    return ZneFit(float(intercept), float(intercept), float(slope), None, fallback=True)


def _mitigated_instance_energy(
    circuit: Circuit,
    h: PauliSum,
    noise: NoiseModel,
    calib: CalibrationSet,
    shots: int,
    rng: Rng,
) -> float:
    energy = 0.0
    for index, basis in enumerate(group_commuting_bases(h)):
        rotated = rotated_for_basis(circuit, basis)
        counts = sample_counts(rotated, shots, rng.child(index), noise=noise)
        quasi = m3_mitigate(counts, calib)
        for t in basis.member_terms:
            coeff, string = h.terms[t]
            energy += coeff * parity_expectation(quasi.weights, string.support_mask)
    return energy


def mitigated_energy(
    circuit: Circuit,
    h: PauliSum,
    noise: NoiseModel,
    zcfg: ZneConfig,
    calib: CalibrationSet,
    rng: Rng,
) -> MitigationReport:
    """Readout-mitigated, twirl-averaged, zero-noise-extrapolated energy.

    For every fold level the circuit is twirled (fresh Paulis per
    instance), folded, measured with readout mitigation, and averaged over
    the twirl instances; the per-level energies are then extrapolated.
    """
    zeta_energies = []
    for z_index, zeta in enumerate(zcfg.fold_levels):
        m = (zeta - 1) // 2
        level_rng = rng.child(z_index)
        values = []
        for t in range(zcfg.n_twirls):
            instance_rng = level_rng.child(t)
            twirled = twirl_cx(circuit, instance_rng.child(0))
            folded = fold_cx(twirled, m)
            values.append(
                _mitigated_instance_energy(
                    folded, h, noise, calib, zcfg.shots, instance_rng.child(1)
                )
            )
        zeta_energies.append(float(np.mean(values)))
    fit = zne_extrapolate(list(zip(zcfg.fold_levels, zeta_energies)))
    return MitigationReport(
        fit.e0, tuple(zcfg.fold_levels), tuple(zeta_energies), fit, zcfg.n_twirls
    )
