"""Dense statevector backend with an emulated LCU block encoding.

Register layout is ancilla-major: amplitude index ``a * 2**n_system + s``,
so ``state.amplitudes.reshape(2**n_ancilla, 2**n_system)[a]`` is the system
block attached to ancilla basis state ``a``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .operators import LcuOperator, PauliSum, PauliTerm

DEFAULT_MAX_QUBITS = 20


def max_qubits() -> int:
    return int(os.environ.get("KRYLOVGRAD_MAX_QUBITS", DEFAULT_MAX_QUBITS))


class RegisterError(ValueError):
    """Operator and state registers do not line up."""


def _parity(v: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(v) & 1).astype(bool)


@dataclass
class StateVector:
    n_system: int
    n_ancilla: int
    amplitudes: np.ndarray

    def __post_init__(self):
        total = self.n_system + self.n_ancilla
        if total > max_qubits():
            raise RegisterError(f"{total} qubits exceeds the cap of {max_qubits()} "
                                "(set KRYLOVGRAD_MAX_QUBITS to raise it)")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << total:
            raise RegisterError(f"expected {1 << total} amplitudes, got {amps.size}")
        self.amplitudes = amps

    @classmethod
    def basis(cls, n_system: int, index: int = 0, n_ancilla: int = 0) -> "StateVector":
        amps = np.zeros(1 << (n_system + n_ancilla), dtype=complex)
        amps[index] = 1.0
        return cls(n_system, n_ancilla, amps)

    @classmethod
    def from_system(cls, vec: np.ndarray, n_system: int) -> "StateVector":
        return cls(n_system, 0, np.asarray(vec, dtype=complex).copy())

    @property
    def n_qubits(self) -> int:
        return self.n_system + self.n_ancilla

    def blocks(self) -> np.ndarray:
        """View of shape ``(2**n_ancilla, 2**n_system)``."""
        return self.amplitudes.reshape(1 << self.n_ancilla, 1 << self.n_system)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.n_system, self.n_ancilla, self.amplitudes.copy())

    def with_ancillas(self, ancilla_state: np.ndarray) -> "StateVector":
        """Tensor a system-only state with an ancilla state (ancilla-major)."""
        if self.n_ancilla:
            raise RegisterError("state already has ancillas")
        anc = np.asarray(ancilla_state, dtype=complex)
        n_anc = int(anc.size).bit_length() - 1
        return StateVector(self.n_system, n_anc, np.kron(anc, self.amplitudes))

    def tofile(self, path) -> None:
        """Little-endian interleaved (re, im) float64 dump for debugging."""
        self.amplitudes.astype("<c16").tofile(path)

    @classmethod
    def fromfile(cls, path, n_system: int, n_ancilla: int = 0) -> "StateVector":
        return cls(n_system, n_ancilla, np.fromfile(path, dtype="<c16"))


def _indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.uint64)


def apply_pauli_terms(vecs: np.ndarray, n: int, terms) -> np.ndarray:
    """``sum_k c_k P_k`` applied along the last axis of ``vecs`` (``2**n`` long).

    ``terms`` yields ``(coefficient, x_mask, z_mask)`` for labelled strings.
    Accumulation follows the order of ``terms``.
    """
    idx = _indices(n)
    out = np.zeros_like(vecs, dtype=complex)
    for coef, x, z in terms:
        out += _apply_single(vecs, idx, coef, x, z)
    return out


def _apply_single(vecs, idx, coef, x, z):
    # (X^x Z^z)|b> = (-1)^{|z&b|} |b^x>, labelled string = i^{|x&z|} X^x Z^z
    src = idx ^ np.uint64(x)
    sign = np.where(_parity(src & np.uint64(z)), -1.0, 1.0)
    factor = coef * (1j ** (bin(x & z).count("1") % 4))
    return factor * sign * vecs[..., src]


def _term_list(op):
    if isinstance(op, PauliSum):
        return [(c, x, z) for (x, z), c in op.items()]
    if isinstance(op, LcuOperator):
        return [(c * p.phase, p.x_mask, p.z_mask) for c, p in op.terms]
    if isinstance(op, PauliTerm):
        return [(op.phase, op.x_mask, op.z_mask)]
    return [(c * p.phase, p.x_mask, p.z_mask) for c, p in op]


def apply_pauli_sum(state: StateVector, op, full_register: bool = False) -> StateVector:
    """Return ``op |state>``; ``op`` acts on the system register unless ``full_register``."""
    n = state.n_qubits if full_register else state.n_system
    if getattr(op, "n_qubits", n) != n:
        raise RegisterError(f"operator acts on {op.n_qubits} qubits, register has {n}")
    vecs = state.amplitudes if full_register else state.blocks()
    out = apply_pauli_terms(vecs, n, _term_list(op))
    return StateVector(state.n_system, state.n_ancilla, out.reshape(-1))


def expectation(state: StateVector, observable, full_register: bool = False) -> float:
    """``<state|O|state> / <state|state>`` for a hermitian Pauli sum."""
    if isinstance(observable, PauliSum) and not observable.is_hermitian():
        raise ValueError("observable is not hermitian")
    nrm = np.vdot(state.amplitudes, state.amplitudes).real
    if nrm == 0:
        raise ValueError("zero-norm state")
    val = np.vdot(state.amplitudes, apply_pauli_sum(state, observable, full_register).amplitudes)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError("expectation value is not real")
    return float(val.real / nrm)


def pauli_variance(state: StateVector, p: PauliTerm, full_register: bool = False) -> float:
    """Single-shot variance ``1 - <P>**2`` of measuring a Pauli string."""
    if p.phase not in (1, -1):
        raise ValueError("Pauli string with imaginary phase is not an observable")
    mean = expectation(state, p, full_register)
    return 1.0 - mean ** 2


class BlockEncoding:
    """PREPARE/SELECT block encoding of ``H = sum_k (alpha_k / lambda) P_k``."""

    def __init__(self, lcu: LcuOperator):
        self.lcu = lcu
        self.n_system = lcu.n_qubits
        self.n_terms = len(lcu)
        self.n_ancilla = int(np.ceil(np.log2(self.n_terms))) if self.n_terms > 1 else 0
        self.lambda_lcu = lcu.lambda_lcu
        g = np.zeros(1 << self.n_ancilla)
        g[: self.n_terms] = np.sqrt([c / self.lambda_lcu for c, _ in lcu.terms])
        self.g_state = g
        self._select = [(p.phase, p.x_mask, p.z_mask) for _, p in lcu.terms]
        self._idx = _indices(self.n_system)

    @cached_property
    def is_real(self) -> bool:
        """Every Pauli string is a real matrix (even number of Y factors)."""
        return all(bin(x & z).count("1") % 2 == 0 for _, x, z in self._select)

    @cached_property
    def hamiltonian(self) -> PauliSum:
        """The block-encoded ``H = sum (alpha_k/lambda) P_k``."""
        return PauliSum.from_terms(self.n_system, [(c / self.lambda_lcu, p) for c, p in self.lcu.terms])

    def system_matrix(self) -> np.ndarray:
        return self.hamiltonian.to_matrix()

    def _check(self, state: StateVector, n_extra: int = 0):
        if state.n_system != self.n_system or state.n_ancilla < self.n_ancilla + n_extra:
            raise RegisterError("state registers do not match the block encoding")

    def _view(self, state: StateVector) -> np.ndarray:
        # (outer ancillas, block-encoding ancillas, system)
        return state.amplitudes.reshape(-1, 1 << self.n_ancilla, 1 << self.n_system)

    def select(self, state: StateVector) -> StateVector:
        """``U|k>|psi> = |k> P_k |psi>`` on the low ``n_ancilla`` ancilla qubits."""
        self._check(state)
        v = self._view(state)
        out = v.copy()
        for k, (ph, x, z) in enumerate(self._select):
            out[:, k, :] = _apply_single(v[:, k, :], self._idx, ph, x, z)
        return StateVector(state.n_system, state.n_ancilla, out.reshape(-1))

    def reflect(self, state: StateVector) -> StateVector:
        """``R_G = (2|G><G| - 1) (x) 1``."""
        self._check(state)
        v = self._view(state)
        proj = np.einsum("a,oas->os", self.g_state, v)
        out = 2 * np.einsum("a,os->oas", self.g_state, proj) - v
        return StateVector(state.n_system, state.n_ancilla, out.reshape(-1))

    def prepare(self, state: StateVector, adjoint: bool = False) -> StateVector:
        """Householder unitary with ``G|0> = |G>`` (it is its own inverse)."""
        self._check(state)
        if self.n_ancilla == 0:
            return state.copy()
        v = self._view(state)
        u = -self.g_state.copy()
        u[0] += 1.0
        nu = np.linalg.norm(u)
        if nu < 1e-15:
            return state.copy()
        u /= nu
        out = v - 2 * np.einsum("a,os->oas", u, np.einsum("a,oas->os", u, v))
        return StateVector(state.n_system, state.n_ancilla, out.reshape(-1))

    def apply_iterate(self, state: StateVector) -> StateVector:
        """Qubitized walk operator ``W = R_G U``."""
        return self.reflect(self.select(state))

    def apply_zero_iterate(self, state: StateVector) -> StateVector:
        """``W_0 = R_0 G^dag U G``, the walk operator flagged by ``|0>_a`` instead of ``|G>_a``."""
        s = self.unitary_h(state)
        v = self._view(s)
        v[:, 1:, :] *= -1
        return s

    def flag_state(self, psi0: StateVector) -> StateVector:
        """``|G>_a |psi0>_s``."""
        return psi0.with_ancillas(self.g_state)

    def zero_flag_state(self, psi0: StateVector) -> StateVector:
        """``|0>_a |psi0>_s``, the input of the zero-flag walk."""
        e0 = np.zeros(1 << self.n_ancilla)
        e0[0] = 1.0
        return psi0.with_ancillas(e0)

    def project_flag(self, state: StateVector) -> np.ndarray:
        """``(<G|_a (x) 1) |state>`` as a system vector."""
        self._check(state)
        return np.einsum("a,oas->os", self.g_state, self._view(state)).reshape(-1)

    def unitary_h(self, state: StateVector) -> StateVector:
        """``U_H = G^dag U G`` (block-encodes ``H`` in the ``|0>_a`` block)."""
        return self.prepare(self.select(self.prepare(state)), adjoint=True)


def apply_iterate(state: StateVector, be: BlockEncoding) -> StateVector:
    return be.apply_iterate(state)


def chebyshev_vectors(be: BlockEncoding, psi0: StateVector, n_max: int,
                      method: str = "recurrence") -> np.ndarray:
    """Rows ``T_n(H)|psi0>`` for ``n = 0..n_max``.

    ``method="iterate"`` projects ``W**n |G>|psi0>`` onto ``<G|``;
    ``method="recurrence"`` uses ``T_{n+1} = 2 H T_n - T_{n-1}``.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if psi0.n_ancilla:
        raise RegisterError("psi0 must be a system-only state")
    dim = 1 << be.n_system
    out = np.zeros((n_max + 1, dim), dtype=complex)
    out[0] = psi0.amplitudes
    if method == "iterate":
        state = be.flag_state(psi0)
        for n in range(1, n_max + 1):
            state = be.apply_iterate(state)
            out[n] = be.project_flag(state)
    elif method == "recurrence":
        terms = _term_list(be.hamiltonian)
        if n_max >= 1:
            out[1] = apply_pauli_terms(out[0], be.n_system, terms)
        for n in range(1, n_max):
            out[n + 1] = 2 * apply_pauli_terms(out[n], be.n_system, terms) - out[n - 1]
    else:
        raise ValueError(f"unknown method {method!r}")
    return out


def chebyshev_apply(be: BlockEncoding, psi0: StateVector, n: int,
                    method: str = "recurrence") -> np.ndarray:
    """``T_n(H)|psi0>`` as a system vector."""
    return chebyshev_vectors(be, psi0, n, method)[n]
