import numpy as np
import pytest

from krylovgrad.ingest import parse_derivatives, read_fcidump
from krylovgrad.krylov import KrylovProblem, sector_ground_energy
from krylovgrad.operators import hamiltonian_pauli_sum, hartree_fock_index
from krylovgrad.simulator import StateVector

from oracles import DATA


class MolecularCase:
    def __init__(self, stem):
        self.dump = read_fcidump(DATA / f"{stem}.fcidump")
        self.mol = self.dump.to_hamiltonian()
        self.op = hamiltonian_pauli_sum(self.mol)
        self.n = self.mol.n_spin_orbitals
        self.ref = hartree_fock_index(self.dump.nelec)
        self.psi0 = StateVector.basis(self.n, self.ref)
        self.krylov = KrylovProblem(self.op, self.psi0)
        self.derivs = parse_derivatives((DATA / f"{stem}.derivs").read_text())
        self.e_exact = sector_ground_energy(self.op, self.ref)

    def sector_ground_state(self):
        from oracles import sector_mask
        na = nb = self.dump.nelec // 2
        mask = sector_mask(self.n, na, nb)
        H = self.op.to_matrix()
        w, v = np.linalg.eigh(H[np.ix_(mask, mask)])
        out = np.zeros(1 << self.n, dtype=complex)
        out[mask] = v[:, 0]
        return w[0], out


@pytest.fixture(scope="session")
def h2():
    return MolecularCase("h2_2o")


@pytest.fixture(scope="session")
def h2o():
    return MolecularCase("h2o_4o")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
