import numpy as np
import pytest

from saqite.linsolve import eigh_symmetric, solve_diag_shift, solve_stable_subspace


def test_eigh_identity():
    decomp = eigh_symmetric(np.eye(4))
    assert np.allclose(decomp.eigenvalues, 1.0)
    B = decomp.eigenvectors
    assert np.allclose(B.T @ B, np.eye(4), atol=1e-12)


def test_eigh_diagonal_sorted_ascending():
    decomp = eigh_symmetric(np.diag([3.0, 1.0]))
    assert np.allclose(decomp.eigenvalues, [1.0, 3.0])
    assert np.allclose(np.abs(decomp.eigenvectors), np.eye(2)[::-1].T)


def test_eigh_reconstruction():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(10, 10))
    m = (m + m.T) / 2
    decomp = eigh_symmetric(m)
    rebuilt = decomp.eigenvectors @ np.diag(decomp.eigenvalues) @ decomp.eigenvectors.T
    assert np.abs(rebuilt - m).max() <= 1e-8 * max(1.0, np.abs(m).max())


def test_eigh_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigh_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_diag_shift_zero_matrix():
    report = solve_diag_shift(np.zeros((3, 3)), np.array([1.0, 2.0, 3.0]), 1.0)
    assert np.allclose(report.theta_dot, [1.0, 2.0, 3.0])
    assert report.active_dims == 3
    assert report.method == "diag_shift"
    assert report.warning is None


def test_diag_shift_identity_halves():
    report = solve_diag_shift(np.eye(2), np.array([2.0, 4.0]), 1.0)
    assert np.allclose(report.theta_dot, [1.0, 2.0])


def test_diag_shift_large_delta_is_gradient_descent():
    rng = np.random.default_rng(1)
    g = rng.normal(size=(5, 5))
    g = (g + g.T) / 2  # norm of order one
    b = rng.normal(size=5)
    delta = 1e6
    report = solve_diag_shift(g, b, delta)
    assert np.allclose(report.theta_dot, b / delta, rtol=1e-5)


def test_diag_shift_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        solve_diag_shift(np.eye(2), np.zeros(2), 0.0)


def test_stable_subspace_identity_keeps_everything():
    b = np.array([1.0, -2.0, 0.5])
    report = solve_stable_subspace(np.eye(3), b, 0.5)
    assert np.allclose(report.theta_dot, b)
    assert report.active_dims == 3


def test_stable_subspace_truncates_small_eigenvalues():
    g = np.diag([1.0, 1e-8])
    report = solve_stable_subspace(g, np.array([1.0, 1.0]), 0.1)
    assert np.allclose(report.theta_dot, [1.0, 0.0], atol=1e-12)
    assert report.active_dims == 1


def test_stable_subspace_keeps_ties():
    g = np.diag([0.1, 0.5])
    report = solve_stable_subspace(g, np.array([1.0, 1.0]), 0.1)
    assert report.active_dims == 2


def test_stable_subspace_matches_direct_solve_when_well_conditioned():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    lam = rng.uniform(0.5, 3.0, size=6)
    g = q @ np.diag(lam) @ q.T
    b = rng.normal(size=6)
    report = solve_stable_subspace(g, b, 0.1)
    direct = np.linalg.solve(g, b)
    assert np.abs(report.theta_dot - direct).max() < 1e-8
    assert report.active_dims == 6


def test_stable_subspace_norm_bound():
    rng = np.random.default_rng(3)
    for delta in (0.05, 0.3, 1.0):
        for _ in range(20):
            m = rng.normal(size=(6, 6))
            g = (m + m.T) / 2
            b = rng.normal(size=6)
            report = solve_stable_subspace(g, b, delta)
            assert np.linalg.norm(report.theta_dot) <= np.linalg.norm(b) / delta + 1e-12


def test_basis_invariance_both_methods():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(5, 5))
    g = (m + m.T) / 2 + 3 * np.eye(5)  # positive definite
    b = rng.normal(size=5)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    for solver in (solve_diag_shift, solve_stable_subspace):
        base = solver(g, b, 0.2).theta_dot
        rotated = solver(q @ g @ q.T, q @ b, 0.2).theta_dot
        assert np.abs(rotated - q @ base).max() < 1e-8


def test_diag_shift_continuous_in_delta():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(4, 4))
    g = (m + m.T) / 2 + 2 * np.eye(4)
    b = rng.normal(size=4)
    previous = solve_diag_shift(g, b, 0.1).theta_dot
    for delta in (0.1 + 1e-7, 0.1 + 1e-5):
        current = solve_diag_shift(g, b, delta).theta_dot
        assert np.abs(current - previous).max() < 1e-3
        previous = current


def test_stable_subspace_active_dims_monotone_in_delta():
    rng = np.random.default_rng(6)
    m = rng.normal(size=(8, 8))
    g = (m + m.T) / 2
    b = rng.normal(size=8)
    dims = [
        solve_stable_subspace(g, b, delta).active_dims
        for delta in (0.01, 0.1, 0.5, 1.0, 2.0)
    ]
    assert all(a >= b_ for a, b_ in zip(dims, dims[1:]))


def test_diag_shift_warns_when_nearly_singular():
    # g has eigenvalue -delta, making the shifted system singular
    g = np.diag([1.0, -0.5])
    report = solve_diag_shift(g, np.array([1.0, 1.0]), 0.5)
    assert report.warning is not None
