import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krylovgrad.operators import LcuOperator, PauliSum, PauliTerm
from krylovgrad.simulator import (BlockEncoding, RegisterError, StateVector, apply_iterate,
                                  apply_pauli_sum, chebyshev_apply, chebyshev_vectors, expectation,
                                  pauli_variance)

from oracles import chebyshev_dense, pauli_matrix, random_real_pauli_sum, random_state


def _random_sum(rng, n, k, real=True):
    if real:
        return random_real_pauli_sum(rng, n, k)
    out = PauliSum(n)
    while len(out) < k:
        label = "".join(rng.choice(list("IXYZ"), n))
        if set(label) != {"I"}:
            out = out + PauliSum.from_terms(n, [(float(rng.normal()), PauliTerm.from_label(label))])
    return out


def _be(op):
    return BlockEncoding(LcuOperator.from_pauli_sum(op))


def test_z_on_zero():
    out = apply_pauli_sum(StateVector.basis(1), PauliSum.from_terms(1, [(1.0, PauliTerm.from_label("Z"))]))
    np.testing.assert_allclose(out.amplitudes, [1, 0])


def test_linearity_of_repeated_term():
    x = PauliTerm.from_label("X")
    op = PauliSum(1) + PauliSum.from_terms(1, [(1.0, x)]) + PauliSum.from_terms(1, [(1.0, x)])
    np.testing.assert_allclose(apply_pauli_sum(StateVector.basis(1), op).amplitudes, [0, 2])


@pytest.mark.parametrize("seed", range(3))
def test_apply_matches_dense(seed):
    rng = np.random.default_rng(seed)
    op = _random_sum(rng, 5, 12, real=False)
    psi = rng.normal(size=32) + 1j * rng.normal(size=32)
    out = apply_pauli_sum(StateVector.from_system(psi, 5), op)
    np.testing.assert_allclose(out.amplitudes, op.to_matrix() @ psi, atol=1e-12)


def test_register_mismatch():
    with pytest.raises(RegisterError):
        apply_pauli_sum(StateVector.basis(2), PauliSum.from_terms(3, [(1.0, PauliTerm.from_label("XII"))]))
    with pytest.raises(RegisterError):
        StateVector(1, 0, np.ones(3))


def test_qubit_cap_is_configurable(monkeypatch):
    monkeypatch.setenv("KRYLOVGRAD_MAX_QUBITS", "3")
    with pytest.raises(RegisterError, match="cap"):
        StateVector.basis(4)


def test_expectation_examples():
    z = PauliSum.from_terms(1, [(1.0, PauliTerm.from_label("Z"))])
    x = PauliSum.from_terms(1, [(1.0, PauliTerm.from_label("X"))])
    assert expectation(StateVector.basis(1), z) == 1.0
    plus = StateVector.from_system(np.array([1, 1]) / np.sqrt(2), 1)
    assert expectation(plus, x) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        expectation(StateVector.basis(1), PauliSum.from_terms(1, [(1j, PauliTerm.from_label("Z"))]))
    with pytest.raises(ValueError):
        expectation(StateVector(1, 0, np.zeros(2)), z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_expectation_and_variance_match_dense(seed):
    rng = np.random.default_rng(seed)
    op = _random_sum(rng, 3, 5, real=False)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    state = StateVector.from_system(psi, 3)
    ref = np.vdot(psi, op.to_matrix() @ psi).real
    assert expectation(state, op) == pytest.approx(ref, abs=1e-10)
    label = "".join(rng.choice(list("IXYZ"), 3))
    p = PauliTerm.from_label(label)
    mean = np.vdot(psi, pauli_matrix(label) @ psi).real
    assert pauli_variance(state, p) == pytest.approx(1 - mean ** 2, abs=1e-10)


def test_pauli_variance_examples():
    assert pauli_variance(StateVector.basis(1), PauliTerm.from_label("Z")) == 0.0
    assert pauli_variance(StateVector.basis(1), PauliTerm.from_label("X")) == 1.0
    with pytest.raises(ValueError):
        pauli_variance(StateVector.basis(1), PauliTerm.from_label("Z", phase=1j))


def _dense_ops(be):
    """Dense G, U, R_G on the full (ancilla-major) register."""
    dim = 1 << (be.n_system + be.n_ancilla)
    cols = {name: [] for name in ("G", "U", "R")}
    for i in range(dim):
        s = StateVector.basis(be.n_system, i, be.n_ancilla)
        cols["G"].append(be.prepare(s).amplitudes)
        cols["U"].append(be.select(s).amplitudes)
        cols["R"].append(be.reflect(s).amplitudes)
    return {k: np.array(v).T for k, v in cols.items()}


@pytest.mark.parametrize("seed", range(3))
def test_block_encoding_invariants(seed):
    rng = np.random.default_rng(seed)
    op = _random_sum(rng, 2, 5, real=False)
    be = _be(op)
    m = _dense_ops(be)
    eye = np.eye(m["U"].shape[0])
    np.testing.assert_allclose(m["U"] @ m["U"], eye, atol=1e-12)
    np.testing.assert_allclose(m["R"] @ m["R"], eye, atol=1e-12)
    np.testing.assert_allclose(m["R"], m["R"].conj().T, atol=1e-12)
    np.testing.assert_allclose(m["G"].conj().T @ m["G"], eye, atol=1e-12)
    uh = m["G"].conj().T @ m["U"] @ m["G"]
    ds = 1 << be.n_system
    np.testing.assert_allclose(uh[:ds, :ds], op.to_matrix() / be.lambda_lcu, atol=1e-12)
    np.testing.assert_array_equal(be.g_state[be.n_terms:], 0.0)


def test_unitarity_of_walk():
    rng = np.random.default_rng(5)
    be = _be(_random_sum(rng, 3, 6))
    state = StateVector(3, be.n_ancilla, rng.normal(size=1 << (3 + be.n_ancilla)))
    state.amplitudes /= state.norm()
    for op in (be.prepare, be.select, be.reflect, be.apply_iterate, be.apply_zero_iterate):
        assert op(state).norm() == pytest.approx(1.0, abs=1e-10)


def test_single_z_iterate():
    be = _be(PauliSum.from_terms(1, [(1.0, PauliTerm.from_label("Z"))]))
    start = be.flag_state(StateVector.basis(1))
    out = apply_iterate(start, be)
    assert np.vdot(start.amplitudes, out.amplitudes).real == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(3))
def test_qubitization_rotation(seed):
    rng = np.random.default_rng(seed)
    op = _random_sum(rng, 2, 4)
    be = _be(op)
    lam, vecs = np.linalg.eigh(op.to_matrix() / be.lambda_lcu)
    for j in range(4):
        start = be.flag_state(StateVector.from_system(vecs[:, j], 2))
        w1 = be.apply_iterate(start)
        overlap = np.vdot(start.amplitudes, w1.amplitudes)
        assert overlap.real == pytest.approx(lam[j], abs=1e-10)
        perp = w1.amplitudes - overlap * start.amplitudes
        assert np.linalg.norm(perp) == pytest.approx(np.sqrt(1 - lam[j] ** 2), abs=1e-9)
        state = start
        for n in range(1, 6):
            state = be.apply_iterate(state)
            ov = np.vdot(start.amplitudes, state.amplitudes)
            assert ov.real == pytest.approx(np.cos(n * np.arccos(lam[j])), abs=1e-9)
        if np.linalg.norm(perp) > 1e-6:
            # 2x2 matrix of W on span{|G,l>, perp} is a Y rotation by 2 arccos(l)
            e2 = perp / np.linalg.norm(perp)
            we2 = be.apply_iterate(StateVector(2, be.n_ancilla, e2)).amplitudes
            basis = np.array([start.amplitudes, e2]).T
            m = basis.conj().T @ np.array([w1.amplitudes, we2]).T
            c, s = lam[j], np.sqrt(1 - lam[j] ** 2)
            np.testing.assert_allclose(m, [[c, -s], [s, c]], atol=1e-9)


def test_chebyshev_low_orders():
    rng = np.random.default_rng(2)
    op = _random_sum(rng, 3, 5)
    be = _be(op)
    psi = StateVector.from_system(random_state(rng, 3), 3)
    np.testing.assert_array_equal(chebyshev_apply(be, psi, 0), psi.amplitudes)
    np.testing.assert_allclose(chebyshev_apply(be, psi, 1), op.to_matrix() @ psi.amplitudes / be.lambda_lcu,
                               atol=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_chebyshev_paths_agree(seed):
    rng = np.random.default_rng(seed)
    op = _random_sum(rng, 3, 7, real=bool(seed % 2))
    be = _be(op)
    psi = StateVector.from_system(random_state(rng, 3), 3)
    rec = chebyshev_vectors(be, psi, 10, "recurrence")
    it = chebyshev_vectors(be, psi, 10, "iterate")
    np.testing.assert_allclose(it, rec, atol=1e-10)
    H = op.to_matrix() / be.lambda_lcu
    np.testing.assert_allclose(rec[5], chebyshev_dense(H, psi.amplitudes, 5), atol=1e-10)


def test_zero_flag_walk_also_generates_chebyshev():
    rng = np.random.default_rng(11)
    op = _random_sum(rng, 2, 4)
    be = _be(op)
    psi = StateVector.from_system(random_state(rng, 2), 2)
    state = be.zero_flag_state(psi)
    H = op.to_matrix() / be.lambda_lcu
    for n in range(1, 6):
        state = be.apply_zero_iterate(state)
        np.testing.assert_allclose(state.blocks()[0], chebyshev_dense(H, psi.amplitudes, n), atol=1e-10)


def test_statevector_binary_dump(tmp_path):
    rng = np.random.default_rng(0)
    s = StateVector(2, 1, rng.normal(size=8) + 1j * rng.normal(size=8))
    s.tofile(tmp_path / "s.bin")
    raw = np.fromfile(tmp_path / "s.bin", dtype="<f8")
    np.testing.assert_array_equal(raw[0::2], s.amplitudes.real)
    np.testing.assert_array_equal(StateVector.fromfile(tmp_path / "s.bin", 2, 1).amplitudes, s.amplitudes)


def test_real_block_encoding_flag():
    assert _be(PauliSum.from_terms(2, [(1.0, PauliTerm.from_label("YY"))])).is_real
    assert not _be(PauliSum.from_terms(2, [(1.0, PauliTerm.from_label("YZ"))])).is_real
