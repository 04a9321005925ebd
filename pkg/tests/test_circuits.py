import numpy as np
import pytest

from saqite.backend import Rng, simulate
from saqite.circuits import (
    Circuit,
    Gate,
    bind,
    build_hea,
    build_qaoa,
    compose,
    fold_cx,
    inverse,
    twirl_cx,
    _TWIRL_TABLE,
)
from saqite.pauli import PauliString, PauliSum, build_maxcut_circle


def _greedy_depth(gates):
    """Slices of qubit-disjoint gates, scheduled greedily in order."""
    slices = []
    for g in gates:
        for layer in slices:
            if not any(set(g.qubits) & set(other.qubits) for other in layer):
                layer.append(g)
                break
        else:
            slices.append([g])
    return len(slices)


def test_hea_parameter_count_formula():
    for n, L in [(4, 2), (3, 0), (2, 1), (8, 3), (5, 4)]:
        assert build_hea(n, L).n_params == 2 * n * (L + 1)


def test_hea_n4_l2_has_24_params():
    assert build_hea(4, 2).n_params == 24


def test_hea_l0_has_no_cx():
    c = build_hea(3, 0)
    assert c.n_params == 6
    assert c.count("CX") == 0


def test_hea_chain_entangling_layer_depth_2():
    for n in (4, 5, 8):
        c = build_hea(n, 1)
        cx = [g for g in c.gates if g.kind == "CX"]
        assert len(cx) == n - 1
        assert _greedy_depth(cx) == 2


def test_hea_rejects_bad_entangler():
    with pytest.raises(ValueError):
        build_hea(3, 1, entangler=[(0, 3)])
    with pytest.raises(ValueError):
        build_hea(3, 1, entangler=[(1, 1)])


def test_qaoa_parameter_count():
    h = build_maxcut_circle(15, 20.0, -20.0)
    assert build_qaoa(h, 2).n_params == 4
    assert build_qaoa(h, 0).n_params == 0


def test_qaoa_r0_prepares_plus_state():
    h = build_maxcut_circle(4, 1.0, -1.0)
    c = build_qaoa(h, 0)
    state = simulate(c)
    assert np.allclose(state, np.full(16, 0.25))


def test_qaoa_clifford_point_is_plus_state():
    h = build_maxcut_circle(5, 2.0, -2.0)
    c = build_qaoa(h, 2)
    state = simulate(bind(c, np.zeros(4)))
    assert np.allclose(state, np.full(32, 1 / np.sqrt(32)))


def test_qaoa_zz_terms_compile_to_one_rzz_each():
    h = build_maxcut_circle(6, 1.0, -1.0)
    c = build_qaoa(h, 2)
    assert c.count("RZZ") == 2 * len(h.terms)
    # bound gamma angle is 2 * gamma * coefficient
    bound = bind(c, [0.3, 0.0, 0.0, 0.0])
    first_rzz = next(g for g in bound.gates if g.kind == "RZZ")
    assert np.isclose(abs(first_rzz.angle), 2 * 0.3 * 1.0)


def test_qaoa_rejects_non_diagonal_cost():
    h = PauliSum.from_terms(2, [(1.0, PauliString.from_label("XZ"))])
    with pytest.raises(ValueError):
        build_qaoa(h, 1)


def test_bind_reads_back_values():
    c = build_hea(2, 1)
    values = np.linspace(-1.0, 1.0, c.n_params)
    bound = bind(c, values)
    angles = [g.angle for g in bound.gates if g.kind in ("RY", "RZ")]
    assert np.allclose(angles, values)


def test_bind_zero_gives_zero_angles():
    bound = bind(build_hea(3, 1), np.zeros(12))
    assert all(g.angle == 0.0 for g in bound.gates if g.kind != "CX")


def test_bind_arity_mismatch():
    with pytest.raises(ValueError):
        bind(build_hea(2, 1), [0.1, 0.2])


def test_bound_hea_state_is_normalized():
    rng = np.random.default_rng(3)
    c = build_hea(2, 1)
    state = simulate(bind(c, rng.uniform(-np.pi, np.pi, c.n_params)))
    assert np.isclose(np.linalg.norm(state), 1.0)


def test_inverse_is_involutive():
    c = bind(build_hea(3, 2), np.random.default_rng(0).uniform(-3, 3, 18))
    assert inverse(inverse(c)) == c


def test_inverse_negates_rotation():
    c = Circuit(1, (Gate("RY", (0,), angle=0.3),), 0)
    assert inverse(c).gates[0].angle == -0.3


def test_inverse_undoes_circuit():
    c = bind(build_hea(3, 2), np.random.default_rng(1).uniform(-3, 3, 18))
    state = simulate(compose(c, inverse(c)))
    assert abs(state[0]) > 1 - 1e-12


def test_inverse_swaps_s_and_sdg():
    c = Circuit(1, (Gate("S", (0,)), Gate("SDG", (0,))), 0)
    kinds = [g.kind for g in inverse(c).gates]
    assert kinds == ["S", "SDG"]  # reversed order, each adjointed


def test_fold_m0_is_identity():
    c = bind(build_hea(3, 1), np.zeros(12))
    assert fold_cx(c, 0) == c


def test_fold_multiplies_cx_count():
    c = Circuit(2, (Gate("H", (0,)), Gate("CX", (0, 1))), 0)
    folded = fold_cx(c, 1)
    assert folded.count("CX") == 3
    for m in range(4):
        assert fold_cx(c, m).count("CX") == 2 * m + 1


def test_fold_preserves_state():
    c = bind(build_hea(4, 2), np.random.default_rng(2).uniform(-3, 3, 24))
    reference = simulate(c)
    for m in (1, 2, 3):
        state = simulate(fold_cx(c, m))
        assert np.abs(state - reference).max() < 1e-12


def test_twirl_identity_pair_maps_to_identity():
    assert _TWIRL_TABLE[("I", "I")] == ("I", "I")


def test_twirl_x_control_propagates_to_both():
    # verified independently by 4x4 conjugation
    assert _TWIRL_TABLE[("X", "I")] == ("X", "X")
    paulis = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]]),
    }
    cx = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])
    pre = np.kron(paulis["I"], paulis["X"])  # X on control = qubit 0
    post = np.kron(paulis["X"], paulis["X"])
    assert np.allclose(cx @ pre, post @ cx)


def test_twirl_preserves_state_up_to_phase():
    c = bind(build_hea(4, 2), np.random.default_rng(4).uniform(-3, 3, 24))
    reference = simulate(c)
    for seed in range(10):
        state = simulate(twirl_cx(c, Rng(seed)))
        assert abs(abs(np.vdot(state, reference)) - 1.0) < 1e-12


def test_twirl_then_fold_preserves_state():
    c = bind(build_hea(3, 2), np.random.default_rng(5).uniform(-3, 3, 18))
    reference = simulate(c)
    state = simulate(fold_cx(twirl_cx(c, Rng(11)), 2))
    assert abs(abs(np.vdot(state, reference)) - 1.0) < 1e-12


def test_dump_format():
    c = Circuit(
        2,
        (Gate("H", (0,)), Gate("CX", (0, 1)), Gate("RY", (1,), param=0)),
        1,
    )
    assert c.dump().splitlines() == ["H 0", "CX 0,1", "RY 1 p0"]


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("RY", (0,))  # rotation without angle or param
    with pytest.raises(ValueError):
        Gate("H", (0,), angle=1.0)  # fixed kind with angle
    with pytest.raises(ValueError):
        Gate("CX", (1, 1))  # repeated qubit
    with pytest.raises(ValueError):
        Circuit(1, (Gate("RY", (0,), param=1),), 2)  # non-contiguous params
