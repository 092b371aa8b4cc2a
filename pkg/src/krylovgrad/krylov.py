"""Krylov subspace matrices, the thresholded generalized eigensolver and
direct energy derivatives.

All Krylov algebra runs on the rescaled operator ``H = (H_phys - shift) / lambda``
where ``shift`` is the identity coefficient and ``lambda`` the LCU one-norm of
the remaining terms, so the spectrum of ``H`` lies in ``[-1, 1]``. Physical
energies are ``lambda * E + shift``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.polynomial import chebyshev as C

from .operators import LcuOperator, PauliSum
from .simulator import BlockEncoding, StateVector, apply_pauli_terms, chebyshev_vectors, _term_list

log = logging.getLogger(__name__)

MAX_DIM = 32
Basis = Literal["chebyshev", "monomial"]


class EmptySubspaceError(RuntimeError):
    """Every overlap eigenvalue fell below the threshold."""


@dataclass(frozen=True)
class KrylovMatrices:
    dim: int
    h_tilde: np.ndarray
    s_tilde: np.ndarray
    basis: str
    moments: np.ndarray | None = None


@dataclass(frozen=True)
class KrylovSolution:
    energies: np.ndarray            # rescaled units, ascending
    coefficients: np.ndarray        # (D, rank); column m is c^m
    rank: int
    threshold: float
    overlap_eigenvalues: np.ndarray  # all eigenvalues of S~, ascending
    overlap_vectors: np.ndarray

    def coefficient(self, m: int = 0) -> np.ndarray:
        if m >= self.rank:
            raise IndexError(f"state {m} not retained (rank {self.rank})")
        return self.coefficients[:, m]


def split_hamiltonian(hamiltonian) -> tuple[float, BlockEncoding]:
    """Remove the identity term and block-encode what is left."""
    lcu = hamiltonian if isinstance(hamiltonian, LcuOperator) else LcuOperator.from_pauli_sum(hamiltonian)
    shift, rest = lcu.split_identity()
    if rest is None:
        raise ValueError("Hamiltonian is proportional to the identity")
    return shift, BlockEncoding(rest)


def _basis_vectors(be: BlockEncoding, psi0: StateVector, D: int, basis: str, method: str) -> np.ndarray:
    if basis == "chebyshev":
        return chebyshev_vectors(be, psi0, D - 1, method)
    if basis == "monomial":
        terms = _term_list(be.hamiltonian)
        out = np.zeros((D, psi0.amplitudes.size), dtype=complex)
        out[0] = psi0.amplitudes
        for n in range(1, D):
            out[n] = apply_pauli_terms(out[n - 1], be.n_system, terms)
        return out
    raise ValueError(f"unknown basis {basis!r}")


def _real(m: np.ndarray, what: str) -> np.ndarray:
    if np.abs(m.imag).max(initial=0.0) > 1e-10:
        raise ValueError(f"{what} has a non-negligible imaginary part")
    return np.ascontiguousarray(m.real)


def build_matrices(be: BlockEncoding, psi0: StateVector, D: int, basis: Basis = "chebyshev",
                   method: str = "recurrence") -> KrylovMatrices:
    """Krylov Hamiltonian and overlap matrices of dimension ``D``.

    Chebyshev basis: ``H~_ij = <psi0|T_i H T_j|psi0>``, ``S~_ij = <psi0|T_i T_j|psi0>``.
    Monomial basis: the Hankel matrices ``H~_ij = m_{i+j+1}``, ``S~_ij = m_{i+j}``
    assembled from the moments ``m_n = <psi0|H^n|psi0>``.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    if D > MAX_DIM:
        raise ValueError(f"D={D} exceeds the sanity cap of {MAX_DIM}")
    if not np.isclose(psi0.norm(), 1.0, atol=1e-10):
        raise ValueError("reference state must be normalized")
    terms = _term_list(be.hamiltonian)
    if basis == "monomial":
        # powers up to D give every moment m_0 .. m_{2D-1} as <H^a psi|H^b psi>
        vecs = _basis_vectors(be, psi0, D + 1, "monomial", method)
        moments = np.empty(2 * D, dtype=complex)
        for n in range(2 * D):
            a = min(n, D)
            moments[n] = np.vdot(vecs[n - a], vecs[a])
        moments = _real(moments, "moment sequence")
        idx = np.add.outer(np.arange(D), np.arange(D))
        return KrylovMatrices(D, moments[idx + 1], moments[idx], "monomial", moments)
    vecs = _basis_vectors(be, psi0, D, basis, method)
    hv = apply_pauli_terms(vecs, be.n_system, terms)
    h = _real(vecs.conj() @ hv.T, "H~")
    s = _real(vecs.conj() @ vecs.T, "S~")
    return KrylovMatrices(D, (h + h.T) / 2, (s + s.T) / 2, basis)


def solve(mat: KrylovMatrices, s: float = 0.0, rcond: float = 1e-10) -> KrylovSolution:
    """Canonically orthogonalized generalized eigensolve ``H~ c = E S~ c``.

    Overlap eigenvectors with eigenvalue below ``max(s, rcond * max eigenvalue)``
    are discarded; ``rcond`` only matters when ``s`` is at the noise floor.
    """
    if s < 0:
        raise ValueError("threshold must be >= 0")
    H, S = mat.h_tilde, mat.s_tilde
    for name, m in (("H~", H), ("S~", S)):
        if np.abs(m - m.T).max() > 1e-10 * max(1.0, np.abs(m).max()):
            raise ValueError(f"{name} is not symmetric")
    lam, U = np.linalg.eigh((S + S.T) / 2)
    lam = np.clip(lam, 0.0, None)
    cut = max(s, rcond * lam.max())
    keep = (lam >= cut) & (lam > 0)
    if not np.any(keep):
        raise EmptySubspaceError(f"all overlap eigenvalues below threshold {cut:g}")
    X = U[:, keep] / np.sqrt(lam[keep])
    Hc = X.T @ H @ X
    E, Y = np.linalg.eigh((Hc + Hc.T) / 2)
    Cm = X @ Y
    for m in range(Cm.shape[1]):
        col = Cm[:, m]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if nz.size and col[nz[0]] < 0:
            Cm[:, m] = -col
    order = np.argsort(E, kind="stable")
    return KrylovSolution(E[order], Cm[:, order], int(keep.sum()), float(s), lam, U)


def krylov_state(be: BlockEncoding, psi0: StateVector, coeffs: np.ndarray,
                 basis: Basis = "chebyshev") -> np.ndarray:
    """``sum_i c_i p_i(H)|psi0>`` for the chosen polynomial basis."""
    vecs = _basis_vectors(be, psi0, len(coeffs), basis, "recurrence")
    return np.asarray(coeffs) @ vecs


class KrylovProblem:
    """A physical Hamiltonian, its block encoding and a reference state."""

    def __init__(self, hamiltonian, psi0: StateVector):
        self.hamiltonian = hamiltonian
        self.shift, self.be = split_hamiltonian(hamiltonian)
        self.lambda_lcu = self.be.lambda_lcu
        self.psi0 = psi0

    def matrices(self, D: int, basis: Basis = "chebyshev", method: str = "recurrence") -> KrylovMatrices:
        return build_matrices(self.be, self.psi0, D, basis, method)

    def solve(self, D: int, s: float = 0.0, basis: Basis = "chebyshev") -> KrylovSolution:
        return solve(self.matrices(D, basis), s)

    def physical(self, energies):
        return self.lambda_lcu * np.asarray(energies) + self.shift

    def state(self, sol: KrylovSolution, m: int = 0, basis: Basis = "chebyshev") -> np.ndarray:
        return krylov_state(self.be, self.psi0, sol.coefficient(m), basis)


def _derivative_matrices(be, psi0, D, V_terms, basis):
    """Exact ``dH~/dtheta`` and ``dS~/dtheta`` for ``dH/dtheta = V`` (rescaled units)."""
    n = be.n_system
    H_terms = _term_list(be.hamiltonian)
    if basis == "monomial":
        # Product rule: dH~_ij = sum_{k=1}^{i+j+1} <psi0|H^{k-1} V H^{i+j+1-k}|psi0>
        pw = _basis_vectors(be, psi0, 2 * D, "monomial", "recurrence")
        vpw = apply_pauli_terms(pw, n, V_terms)
        pair = pw.conj() @ vpw.T          # pair[a, b] = <H^a psi0|V|H^b psi0>

        def d_moment(order):
            return sum(pair[k - 1, order - k] for k in range(1, order + 1))

        dm = np.array([d_moment(o) for o in range(2 * D)])
        idx = np.add.outer(np.arange(D), np.arange(D))
        return _real(dm[idx + 1], "dH~"), _real(dm[idx], "dS~")
    # Chebyshev: differentiate the recurrence T_{n+1} = 2 H T_n - T_{n-1}
    vecs = _basis_vectors(be, psi0, D, "chebyshev", "recurrence")
    dvecs = np.zeros_like(vecs)
    if D > 1:
        dvecs[1] = apply_pauli_terms(vecs[0], n, V_terms)
    for k in range(1, D - 1):
        dvecs[k + 1] = (2 * apply_pauli_terms(vecs[k], n, V_terms)
                        + 2 * apply_pauli_terms(dvecs[k], n, H_terms) - dvecs[k - 1])
    hv = apply_pauli_terms(vecs, n, H_terms)
    vv = apply_pauli_terms(vecs, n, V_terms)
    dH = dvecs.conj() @ hv.T + vecs.conj() @ vv.T + hv.conj() @ dvecs.T
    dS = dvecs.conj() @ vecs.T + vecs.conj() @ dvecs.T
    return _real(dH, "dH~"), _real(dS, "dS~")


def direct_energy_derivative(hamiltonian, psi0: StateVector, D: int, s: float, V: PauliSum,
                             m: int = 0, basis: Basis = "monomial", return_parts: bool = False):
    """Derivative of the physical Krylov energy ``E_m`` along ``dH_phys/dtheta = V``.

    Evaluates ``dE = sum_ij c_i c_j (dH~_ij - E dS~_ij) / sum_ij c_i c_j S~_ij``
    with every matrix-element derivative computed from exact statevectors.

    The affine map to the rescaled operator is frozen at ``theta``: the Krylov
    space, hence the Krylov energy, does not depend on shift or scale, so
    differentiating with fixed ``lambda`` and shift equals differentiating the
    energy obtained with ``lambda(theta)``.
    """
    if not V.is_hermitian():
        raise ValueError("V must be hermitian")
    prob = KrylovProblem(hamiltonian, psi0)
    mat = prob.matrices(D, basis)
    sol = solve(mat, s)
    c = sol.coefficient(m)
    E = sol.energies[m]
    Vr = V * (1.0 / prob.lambda_lcu)
    dH, dS = _derivative_matrices(prob.be, psi0, D, _term_list(Vr), basis)
    norm = c @ mat.s_tilde @ c
    if abs(norm - 1.0) > 1e-8:
        log.info("S-norm of c^%d deviates from 1: %.3e", m, norm)
    d_rescaled = (c @ dH @ c - E * (c @ dS @ c)) / norm
    val = prob.lambda_lcu * d_rescaled
    if return_parts:
        return val, {"dH": dH, "dS": dS, "c": c, "E": E, "matrices": mat, "problem": prob}
    return val


def count_distinct_measurements(D: int, mode: str = "energy") -> int:
    """Distinct expectation values needed for energies or direct gradients.

    ``energy``: the moments ``<psi0|H^n|psi0>``, ``n = 1..2D-1`` (``m_0 = 1``).
    ``direct-gradient``: ordered pairs ``(a, b)`` of ``<psi0|H^a V H^b|psi0>``
    from the product-rule expansion of every ``dH~_ij`` and ``dS~_ij``.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    if mode == "energy":
        return 2 * D - 1
    if mode == "direct-gradient":
        # orders i+j run over 0..2D-2, an order-n term contributes n+1 pairs
        return D * (2 * D - 1)
    raise ValueError(f"unknown mode {mode!r}")


def chebyshev_to_monomial(c: np.ndarray) -> np.ndarray:
    """Coefficients of ``sum c_i T_i`` in the power basis."""
    return C.cheb2poly(np.asarray(c, dtype=float))


def export_csv(path, mat: KrylovMatrices, sol: KrylovSolution | None = None) -> None:
    """Long-format CSV: ``quantity,i,j,value`` rows for H~, S~, overlap spectrum and energies."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "i", "j", "value"])
        for name, m in (("H_tilde", mat.h_tilde), ("S_tilde", mat.s_tilde)):
            for i, j in np.ndindex(m.shape):
                w.writerow([name, i, j, f"{m[i, j]:.12g}"])
        if sol is not None:
            for i, v in enumerate(sol.overlap_eigenvalues):
                w.writerow(["overlap_eigenvalue", i, "", f"{v:.12g}"])
            for i, v in enumerate(sol.energies):
                w.writerow(["energy", i, "", f"{v:.12g}"])


def sector_ground_energy(hamiltonian, reference_index: int) -> float:
    """Lowest eigenvalue of the physical Hamiltonian in the reference state's
    particle-number and ``S_z`` sector (interleaved spin orbitals)."""
    mat = hamiltonian.to_matrix()
    dim = mat.shape[0]
    idx = np.arange(dim, dtype=np.uint64)
    alpha = np.uint64(int("55" * 8, 16))
    beta = np.uint64(int("aa" * 8, 16))
    na = np.bitwise_count(idx & alpha)
    nb = np.bitwise_count(idx & beta)
    ref = np.uint64(reference_index)
    mask = (na == np.bitwise_count(ref & alpha)) & (nb == np.bitwise_count(ref & beta))
    sub = mat[np.ix_(mask, mask)]
    return float(np.linalg.eigvalsh((sub + sub.conj().T) / 2)[0])
