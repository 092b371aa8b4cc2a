import io
import logging

import numpy as np
import pytest

from krylovgrad.ingest import (Fcidump, ParseError, RunConfig, finite_difference_derivatives,
                               load_config, parse_derivatives, parse_fcidump, read_fcidump)
from krylovgrad.operators import assemble_hamiltonian

from oracles import DATA, annihilator, creator

HEADER = "&FCI NORB={norb},NELEC={nelec},MS2=0,\n ORBSYM=1,1,\n ISYM=1,\n&END\n"


def _spatial_hamiltonian_dense(h, g, e):
    """``e + sum h_pq a+_ps a_qs + 1/2 sum (pq|rs) a+_ps a+_rt a_st a_qs`` over interleaved spins."""
    n = 2 * h.shape[0]
    dim = 1 << n
    H = e * np.eye(dim)
    a = [annihilator(p, n) for p in range(n)]
    c = [creator(p, n) for p in range(n)]
    norb = h.shape[0]
    for p in range(norb):
        for q in range(norb):
            for s in (0, 1):
                H += h[p, q] * c[2 * p + s] @ a[2 * q + s]
    for p, q, r, t in np.ndindex(g.shape):
        if g[p, q, r, t] == 0:
            continue
        for s1 in (0, 1):
            for s2 in (0, 1):
                H += 0.5 * g[p, q, r, t] * (c[2 * p + s1] @ c[2 * r + s2] @ a[2 * t + s2]
                                             @ a[2 * q + s1])
    return H


def test_core_energy_only():
    mol = parse_fcidump("&FCI NORB=1,NELEC=0,MS2=0,\n&END\n0.5 0 0 0 0\n")
    assert mol.e_nuc == 0.5
    assert not mol.k.any() and not mol.g.any()


def test_one_body_entry_is_spin_expanded():
    mol = parse_fcidump(HEADER.format(norb=2, nelec=2) + "-1.25 1 1 0 0\n")
    assert mol.k[0, 0] == -1.25 and mol.k[1, 1] == -1.25
    assert mol.k[2, 2] == 0.0


def test_two_orbital_ground_energy_matches_dense_fermions():
    text = HEADER.format(norb=2, nelec=2) + "0.675 1 1 1 1\n-1.252 1 1 0 0\n"
    mol = parse_fcidump(text)
    H = assemble_hamiltonian(mol).to_matrix()
    h = np.zeros((2, 2))
    h[0, 0] = -1.252
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = 0.675
    ref = _spatial_hamiltonian_dense(h, g, 0.0)
    np.testing.assert_allclose(H, ref, atol=1e-12)
    assert np.linalg.eigvalsh(H)[0] == pytest.approx(np.linalg.eigvalsh(ref)[0], abs=1e-12)


def test_bundled_fcidump_matches_dense_fermions():
    dump = read_fcidump((DATA / "h2_2o.fcidump").read_text())
    H = assemble_hamiltonian(dump.to_hamiltonian()).to_matrix()
    np.testing.assert_allclose(H, _spatial_hamiltonian_dense(dump.h, dump.g, dump.e_core), atol=1e-11)


@pytest.mark.parametrize("text,msg", [
    ("NORB=2\n&END\n", "header"),
    ("&FCI NELEC=2,\n&END\n", "header"),
    ("&FCI NORB=1,\n&END\nabc 1 1 0 0\n", "non-numeric"),
    ("&FCI NORB=1,\n&END\n0.1 2 1 0 0\n", "NORB"),
    ("&FCI NORB=1,\n&END\n0.1 1 1 0\n", "expected"),
])
def test_fcidump_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        read_fcidump(text)


def test_conflicting_duplicate_keeps_last(caplog):
    with caplog.at_level(logging.WARNING):
        d = read_fcidump("&FCI NORB=1,FOO=3,\n&END\n0.1 1 1 0 0\n0.2 1 1 0 0\n")
    assert d.h[0, 0] == 0.2
    assert "conflicting" in caplog.text and "FOO" in caplog.text


def test_fortran_exponent_and_bytes_input():
    d = read_fcidump(b"&FCI NORB=1,\n&END\n1.5D-1 1 1 1 1\n")
    assert d.g[0, 0, 0, 0] == 0.15


def test_fcidump_round_trip_fixed_point():
    d = read_fcidump(DATA / "h2o_4o.fcidump")
    again = read_fcidump(d.dumps())
    np.testing.assert_array_equal(again.h, d.h)
    np.testing.assert_array_equal(again.g, d.g)
    assert again.e_core == d.e_core and again.nelec == d.nelec
    assert read_fcidump(again.dumps()).dumps() == again.dumps()


def test_eightfold_expansion():
    d = read_fcidump("&FCI NORB=3,\n&END\n0.7 1 2 3 1\n")
    idx = np.argwhere(d.g != 0)
    assert len(idx) == 8
    for i, j, k, l in idx:
        for perm in ((j, i, k, l), (i, j, l, k), (k, l, i, j)):
            assert d.g[perm] == 0.7


def test_derivative_energy_only():
    d = parse_derivatives("norb 1\ncoord x\nE 0.1\n")
    assert d.labels == ["x"]
    np.testing.assert_array_equal(d.de_nuc_dx, [0.1])
    assert not d.dk_dx.any() and not d.dg_dx.any()


def test_derivative_symmetry_expansion():
    d = parse_derivatives("nspinorb 2\ncoord a\nK 0 1 0.3\n")
    assert d.dk_dx[0, 0, 1] == d.dk_dx[0, 1, 0] == 0.3
    s = parse_derivatives("norb 2  # spatial\ncoord a\nK 0 1 0.3\nG 0 1 1 1 0.2\n")
    assert s.n_spin_orbitals == 4
    assert s.dk_dx[0, 0, 2] == s.dk_dx[0, 3, 1] == 0.3
    assert s.dk_dx[0, 0, 3] == 0.0
    assert s.dg_dx[0, 2, 0, 3, 3] == 0.2


@pytest.mark.parametrize("text,msg", [
    ("norb 1\ncoord x\nQ 1\n", "unknown record"),
    ("norb 1\ncoord x\nK 0 1 0.1\n", "out of range"),
    ("norb 1\ncoord x\ncoord y\nE 1\n", "no records"),
    ("coord x\nE 1\n", "orbital count"),
    ("norb 1\nE 1\n", "before any coord"),
    ("norb 1\ncoord x\nK 0 0.1\n", "field count"),
])
def test_derivative_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        parse_derivatives(text)


def test_derivative_round_trip():
    d = parse_derivatives((DATA / "h2o_4o.derivs").read_text())
    again = parse_derivatives(d.dumps())
    assert again.labels == d.labels
    np.testing.assert_array_equal(again.dk_dx, d.dk_dx)
    np.testing.assert_array_equal(again.dg_dx, d.dg_dx)
    np.testing.assert_array_equal(again.de_nuc_dx, d.de_nuc_dx)


def test_finite_difference_derivatives_are_linear_slope():
    base = read_fcidump(DATA / "h2_2o.fcidump")
    rng = np.random.default_rng(3)
    dh = rng.normal(size=(2, 2))
    dh = dh + dh.T
    step = 1e-3

    def shifted(x):
        return Fcidump(2, 2, 0, base.h + x * dh, base.g.copy(), base.e_core + 2 * x)

    d = finite_difference_derivatives(shifted(step), shifted(-step), step)
    np.testing.assert_allclose(d.dk_dx[0][::2, ::2], dh, atol=1e-9)
    assert d.de_nuc_dx[0] == pytest.approx(2.0)
    assert not d.dg_dx.any()


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ndim = 6\nthreshold=1e-6\nshots=1000\nsweep-dim = 2,3,4\nestimator=post\n")
    cfg = load_config(str(p), seed=7, dim=None)
    assert cfg.dim == 6 and cfg.threshold == 1e-6 and cfg.shots == 1000
    assert cfg.sweep_dim == [2, 3, 4] and cfg.estimator == "post" and cfg.seed == 7
    assert load_config(io.StringIO("dim=3\n"), dim=5).dim == 5
    with pytest.raises(ParseError):
        load_config(io.StringIO("bogus=1\n"))


@pytest.mark.parametrize("kw", [dict(dim=0), dict(dim=2, state=2), dict(ensemble=0),
                                dict(threshold=-1.0), dict(estimator="magic"), dict(shots=0)])
def test_run_config_invariants(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


def test_analytic_shot_count():
    assert RunConfig().shot_count == 1
    assert RunConfig(shots=50).shot_count == 50
