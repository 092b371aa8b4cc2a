"""Shared loader for the bundled integral files."""

from importlib import resources

from krylovgrad import KrylovProblem, StateVector, hamiltonian_pauli_sum, parse_derivatives, read_fcidump
from krylovgrad.krylov import sector_ground_energy
from krylovgrad.operators import hartree_fock_index


def load(stem: str):
    """Return (Pauli Hamiltonian, Hartree-Fock state, derivatives, exact sector energy, Krylov problem)."""
    root = resources.files("krylovgrad") / "data"
    dump = read_fcidump((root / f"{stem}.fcidump").read_text())
    op = hamiltonian_pauli_sum(dump.to_hamiltonian())
    ref = hartree_fock_index(dump.nelec)
    psi0 = StateVector.basis(op.n_qubits, ref)
    derivs = parse_derivatives((root / f"{stem}.derivs").read_text())
    return op, psi0, derivs, sector_ground_energy(op, ref), KrylovProblem(op, psi0)
