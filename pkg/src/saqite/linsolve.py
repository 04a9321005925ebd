"""Regularized solvers for the noisy metric-times-derivative linear system.

Two regularizations are provided: adding a weighted identity before a
direct solve, and inverting only on the eigenspace whose eigenvalues
clear a cutoff (which bounds the solution norm by ``|b|/delta``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SYMMETRY_TOL = 1e-8
_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Solution vector plus how it was obtained."""

    theta_dot: np.ndarray
    active_dims: int
    method: str
    delta: float
    warning: str | None = None


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > _SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return m


def eigh_symmetric(m: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix, eigenvalues ascending."""
    m = _check_symmetric(m)
    eigenvalues, eigenvectors = np.linalg.eigh((m + m.T) / 2.0)
    return EigenDecomposition(eigenvalues, eigenvectors)


def solve_diag_shift(g: np.ndarray, b: np.ndarray, delta: float) -> SolveReport:
    """Solve (g + delta*I) x = b directly, with a residual check.

    A solvability warning is attached when the shifted matrix is close to
    singular (delta must exceed the magnitude of the most negative
    eigenvalue of a noisy estimate; that is the caller's responsibility).
    """
    if delta <= 0:
        raise ValueError("diagonal shift must be positive")
    g = _check_symmetric(g)
    b = np.asarray(b, dtype=float)
    shifted = g + delta * np.eye(g.shape[0])
    warning = None
    try:
        x = np.linalg.solve(shifted, b)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(shifted, b, rcond=None)[0]
        warning = "shifted matrix is singular; least-squares solution returned"
    residual = float(np.linalg.norm(shifted @ x - b))
    bound = _RESIDUAL_TOL * max(np.linalg.norm(b), 1e-300)
    if warning is None and residual > bound:
        cond = float(np.linalg.cond(shifted))
        warning = (
            f"residual {residual:.2e} exceeds tolerance; condition number {cond:.2e}"
        )
    return SolveReport(x, g.shape[0], "diag_shift", float(delta), warning)


def solve_stable_subspace(g: np.ndarray, b: np.ndarray, delta: float) -> SolveReport:
    """Invert only on eigencomponents with eigenvalue >= delta (ties kept)."""
    if delta <= 0:
        raise ValueError("eigenvalue cutoff must be positive")
    decomp = eigh_symmetric(g)
    b = np.asarray(b, dtype=float)
    lam = decomp.eigenvalues
    b_eig = decomp.eigenvectors.T @ b
    keep = lam >= delta
    x_eig = np.zeros_like(b_eig)
    x_eig[keep] = b_eig[keep] / lam[keep]
    return SolveReport(
        decomp.eigenvectors @ x_eig,
        int(keep.sum()),
        "stable_subspace",
        float(delta),
    )
