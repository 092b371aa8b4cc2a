"""Pauli algebra, fermionic operators, Jordan-Wigner mapping and molecular
Hamiltonian assembly.

Bit convention: qubit ``j`` is bit ``j`` of a computational-basis index, so
``|b>`` with ``b = 0b101`` has qubits 0 and 2 in state ``|1>``. Under the
Jordan-Wigner mapping ``|1>`` means the spin orbital is occupied.

Spin orbitals are interleaved: spin orbital ``2p`` is spatial orbital ``p``
with spin alpha and ``2p + 1`` the same spatial orbital with spin beta.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

CUTOFF = 1e-12

_PHASE_TO_EXP = {1: 0, 1j: 1, -1: 2, -1j: 3}
_EXP_TO_PHASE = (1, 1j, -1, -1j)

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_SINGLE = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _product_exponent(xa: int, za: int, xb: int, zb: int) -> int:
    """Power of ``i`` picked up by multiplying two labelled Pauli strings.

    A labelled string equals ``i**|x&z| X^x Z^z``; moving ``Z^za`` past
    ``X^xb`` costs ``(-1)**|za&xb|``.
    """
    x, z = xa ^ xb, za ^ zb
    return (_popcount(xa & za) + _popcount(xb & zb) + 2 * _popcount(za & xb)
            - _popcount(x & z)) % 4


@dataclass(frozen=True)
class PauliTerm:
    """A Pauli string ``phase * sigma_{n-1} ... sigma_0``.

    ``x_mask``/``z_mask`` select X and Z components per qubit (both set means
    Y). ``phase`` is one of ``1, -1, 1j, -1j``.
    """

    n_qubits: int
    x_mask: int = 0
    z_mask: int = 0
    phase: complex = 1

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        limit = 1 << self.n_qubits
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError("mask has bits beyond n_qubits")
        if complex(self.phase) not in _PHASE_TO_EXP:
            raise ValueError(f"phase must be one of +-1, +-1j, got {self.phase}")
        object.__setattr__(self, "phase", _EXP_TO_PHASE[_PHASE_TO_EXP[complex(self.phase)]])

    @classmethod
    def from_label(cls, label: str, n_qubits: int | None = None, phase: complex = 1) -> "PauliTerm":
        """Build from a sparse label such as ``"X0 Y2"`` or a dense one like ``"ZIX"``.

        Dense labels are read left to right as qubit ``n-1`` down to qubit 0.
        """
        label = label.strip()
        x = z = 0
        if not label or label == "I":
            n = n_qubits or 1
            return cls(n, 0, 0, phase)
        if any(ch.isdigit() for ch in label):
            top = -1
            for tok in label.split():
                letter, idx = tok[0].upper(), int(tok[1:])
                top = max(top, idx)
                if letter in "XY":
                    x |= 1 << idx
                if letter in "ZY":
                    z |= 1 << idx
            n = n_qubits if n_qubits is not None else top + 1
        else:
            n = len(label) if n_qubits is None else n_qubits
            for pos, letter in enumerate(reversed(label.upper())):
                if letter in "XY":
                    x |= 1 << pos
                if letter in "ZY":
                    z |= 1 << pos
        return cls(n, x, z, phase)

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    @property
    def key(self) -> tuple[int, int]:
        return self.x_mask, self.z_mask

    def label(self) -> str:
        return "".join(
            _LETTERS[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]
            for q in reversed(range(self.n_qubits))
        )

    def __repr__(self):
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[self.phase]
        return f"PauliTerm({sign}{self.label()})"

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        return pauli_product(self, other)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix built from Kronecker products."""
        out = np.array([[1.0 + 0j]])
        for letter in self.label():
            out = np.kron(out, _SINGLE[letter])
        return self.phase * out


def pauli_product(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Return the operator product ``a @ b`` with its accumulated phase."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    exp = (_PHASE_TO_EXP[a.phase] + _PHASE_TO_EXP[b.phase]
           + _product_exponent(a.x_mask, a.z_mask, b.x_mask, b.z_mask)) % 4
    return PauliTerm(a.n_qubits, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask, _EXP_TO_PHASE[exp])


class PauliSum:
    """Complex linear combination of labelled Pauli strings.

    Stored as ``{(x_mask, z_mask): coefficient}``; every string carries unit
    phase, so a hermitian operator has real coefficients.
    """

    __slots__ = ("n_qubits", "_terms")

    def __init__(self, n_qubits: int, terms: dict | None = None):
        self.n_qubits = n_qubits
        self._terms: dict[tuple[int, int], complex] = dict(terms or {})

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[complex, PauliTerm]]) -> "PauliSum":
        out = cls(n_qubits)
        for coef, p in terms:
            if p.n_qubits != n_qubits:
                raise ValueError("term qubit count mismatch")
            out._add(p.key, coef * p.phase)
        return out

    @classmethod
    def identity(cls, n_qubits: int, coef: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {(0, 0): complex(coef)})

    def _add(self, key, coef):
        self._terms[key] = self._terms.get(key, 0.0) + coef

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[complex, PauliTerm]]:
        for (x, z), c in self._terms.items():
            yield c, PauliTerm(self.n_qubits, x, z)

    def items(self):
        return self._terms.items()

    def coefficient(self, term: PauliTerm | str) -> complex:
        if isinstance(term, str):
            term = PauliTerm.from_label(term, self.n_qubits)
        return self._terms.get(term.key, 0.0) * term.phase.conjugate()

    def copy(self) -> "PauliSum":
        return PauliSum(self.n_qubits, self._terms)

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PauliSum.identity(self.n_qubits, other)
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        out = self.copy()
        for k, c in other._terms.items():
            out._add(k, c)
        return out

    __radd__ = __add__

    def __neg__(self):
        return PauliSum(self.n_qubits, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return PauliSum(self.n_qubits, {k: c * other for k, c in self._terms.items()})
        if isinstance(other, PauliSum):
            if other.n_qubits != self.n_qubits:
                raise ValueError("qubit count mismatch")
            out = PauliSum(self.n_qubits)
            for (xa, za), ca in self._terms.items():
                for (xb, zb), cb in other._terms.items():
                    exp = _product_exponent(xa, za, xb, zb)
                    out._add((xa ^ xb, za ^ zb), ca * cb * _EXP_TO_PHASE[exp])
            return out
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self * other

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: np.conj(c) for k, c in self._terms.items()})

    def simplify(self, tol: float = CUTOFF) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: c for k, c in self._terms.items() if abs(c) >= tol})

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(np.imag(c)) <= tol for c in self._terms.values())

    def real(self) -> "PauliSum":
        """Hermitian part for operators whose imaginary coefficients are noise."""
        return PauliSum(self.n_qubits, {k: complex(np.real(c)) for k, c in self._terms.items()})

    def identity_coefficient(self) -> complex:
        return self._terms.get((0, 0), 0.0)

    def one_norm(self) -> float:
        return float(sum(abs(c) for c in self._terms.values()))

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in self:
            out += c * p.to_matrix()
        return out

    def __repr__(self):
        parts = [f"{c:.6g}*{p.label()}" for c, p in list(self)[:6]]
        more = "" if len(self) <= 6 else f" + ... ({len(self)} terms)"
        return f"PauliSum({' + '.join(parts) or '0'}{more})"


@dataclass(frozen=True)
class LcuOperator:
    """Hamiltonian as ``sum_k alpha_k P_k`` with ``alpha_k > 0``.

    Negative coefficients are absorbed into the phase of ``P_k``; the
    one-norm ``lambda_lcu`` is recomputed from the terms.
    """

    terms: tuple[tuple[float, PauliTerm], ...]
    n_qubits: int
    lambda_lcu: float = field(init=False)

    def __post_init__(self):
        seen = set()
        for coef, p in self.terms:
            if not coef > 0:
                raise ValueError("LCU coefficients must be strictly positive")
            if p.phase not in (1, -1):
                raise ValueError("LCU Pauli strings must carry a real phase")
            if p.key in seen:
                raise ValueError(f"duplicate Pauli string {p.label()}")
            seen.add(p.key)
        object.__setattr__(self, "lambda_lcu", float(sum(c for c, _ in self.terms)))

    @classmethod
    def from_pauli_sum(cls, op: PauliSum, tol: float = CUTOFF) -> "LcuOperator":
        terms = []
        for (x, z), c in sorted(op.items()):
            if abs(np.imag(c)) > 1e-10:
                raise ValueError("LCU form requires a hermitian operator with real coefficients")
            c = float(np.real(c))
            if abs(c) < tol:
                continue
            terms.append((abs(c), PauliTerm(op.n_qubits, x, z, 1 if c > 0 else -1)))
        if not terms:
            raise ValueError("operator is zero")
        return cls(tuple(terms), op.n_qubits)

    def __len__(self):
        return len(self.terms)

    def to_pauli_sum(self) -> PauliSum:
        return PauliSum.from_terms(self.n_qubits, self.terms)

    def to_matrix(self) -> np.ndarray:
        return self.to_pauli_sum().to_matrix()

    def split_identity(self) -> tuple[float, "LcuOperator | None"]:
        """Separate the identity component: returns ``(shift, rest)``."""
        shift = 0.0
        rest = []
        for c, p in self.terms:
            if p.is_identity:
                shift += c * p.phase.real
            else:
                rest.append((c, p))
        return shift, (LcuOperator(tuple(rest), self.n_qubits) if rest else None)


class FermionOperator:
    """Sum of products of ladder operators.

    Terms map a tuple of ``(mode, is_creation)`` pairs (leftmost acts last)
    to a complex coefficient.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms: dict[tuple[tuple[int, bool], ...], complex] = dict(terms or {})

    @classmethod
    def ladder(cls, mode: int, creation: bool, coef: complex = 1.0) -> "FermionOperator":
        return cls({((mode, creation),): coef})

    @classmethod
    def excitation(cls, p: int, q: int, coef: complex = 1.0) -> "FermionOperator":
        """``coef * a_p^dag a_q``."""
        return cls({((p, True), (q, False)): coef})

    @classmethod
    def identity(cls, coef: complex = 1.0) -> "FermionOperator":
        return cls({(): coef})

    def __add__(self, other):
        out = FermionOperator(self.terms)
        for k, c in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + c
        return out

    def __neg__(self):
        return FermionOperator({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return FermionOperator({k: c * other for k, c in self.terms.items()})
        out = FermionOperator()
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                k = ka + kb
                out.terms[k] = out.terms.get(k, 0.0) + ca * cb
        return out

    __rmul__ = __mul__

    def adjoint(self) -> "FermionOperator":
        return FermionOperator({
            tuple((m, not cr) for m, cr in reversed(k)): np.conj(c)
            for k, c in self.terms.items()
        })

    def max_mode(self) -> int:
        return max((m for k in self.terms for m, _ in k), default=-1)

    def normal_ordered(self) -> "FermionOperator":
        """Creation operators left of annihilators, each group in descending mode order."""
        out = FermionOperator()
        for k, c in self.terms.items():
            for kk, cc in _normal_order_term(k, c):
                out.terms[kk] = out.terms.get(kk, 0.0) + cc
        return FermionOperator({k: c for k, c in out.terms.items() if abs(c) >= CUTOFF})

    def __eq__(self, other):
        if not isinstance(other, FermionOperator):
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) < 1e-12 for k in keys)

    def __repr__(self):
        def fmt(k):
            return " ".join(f"{m}^" if cr else f"{m}" for m, cr in k) or "1"
        return "FermionOperator(" + " + ".join(f"{c:.6g} [{fmt(k)}]" for k, c in self.terms.items()) + ")"


def _normal_order_term(term, coef):
    stack = [(list(term), coef)]
    done = []
    while stack:
        ops, c = stack.pop()
        swapped = False
        for i in range(len(ops) - 1):
            (m1, c1), (m2, c2) = ops[i], ops[i + 1]
            # creation must precede annihilation; within a type, descending modes
            wrong = (not c1 and c2) or (c1 == c2 and m1 < m2)
            if c1 == c2 and m1 == m2:
                ops = None
                break
            if wrong:
                swapped_ops = ops[:i] + [ops[i + 1], ops[i]] + ops[i + 2:]
                if (not c1) and c2 and m1 == m2:
                    # a_p a_p^dag = 1 - a_p^dag a_p
                    stack.append((ops[:i] + ops[i + 2:], c))
                stack.append((swapped_ops, -c))
                swapped = True
                break
        if ops is None:
            continue
        if not swapped:
            done.append((tuple(ops), c))
    return done


@lru_cache(maxsize=None)
def _jw_ladder(mode: int, creation: bool, n_qubits: int) -> PauliSum:
    z_string = (1 << mode) - 1
    bit = 1 << mode
    # a^dag = (X - iY)/2, a = (X + iY)/2 on the target, Z on lower modes
    sign = -1 if creation else 1
    return PauliSum(n_qubits, {(bit, z_string): 0.5, (bit, z_string | bit): 0.5j * sign})


def jordan_wigner(op: FermionOperator, n_qubits: int) -> PauliSum:
    """Jordan-Wigner image of a fermionic operator as a Pauli sum."""
    if op.max_mode() >= n_qubits:
        raise ValueError(f"mode index {op.max_mode()} out of range for {n_qubits} qubits")
    out = PauliSum(n_qubits)
    for term, coef in op.terms.items():
        acc = PauliSum.identity(n_qubits, coef)
        for mode, creation in term:
            acc = acc * _jw_ladder(mode, creation, n_qubits)
        for k, c in acc.items():
            out._add(k, c)
    return out.simplify()


@lru_cache(maxsize=None)
def excitation_pauli(p: int, q: int, n_qubits: int) -> PauliSum:
    """JW image of ``E_pq = a_p^dag a_q``."""
    return jordan_wigner(FermionOperator.excitation(p, q), n_qubits)


@dataclass(frozen=True, eq=False)
class MolecularHamiltonian:
    """Second-quantized molecular Hamiltonian over spin orbitals.

    ``H = e_nuc + sum_pq k_pq E_pq + 1/2 sum_pqrs g_pqrs E_pq E_rs`` with
    ``g`` in chemists' notation and ``k`` the effective one-body operator
    ``h_pq - 1/2 sum_r g_prrq``.
    """

    n_spin_orbitals: int
    e_nuc: float
    k: np.ndarray
    g: np.ndarray
    n_electrons: int | None = None

    def __post_init__(self):
        n = self.n_spin_orbitals
        k = np.asarray(self.k, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if k.shape != (n, n) or g.shape != (n, n, n, n):
            raise ValueError("integral shapes do not match n_spin_orbitals")
        if not np.allclose(k, k.T, atol=1e-10):
            raise ValueError("one-body matrix k must be symmetric")
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(g, g.transpose(perm), atol=1e-10):
                raise ValueError("two-electron tensor lacks 8-fold symmetry")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "g", g)


def effective_one_body(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``k_pq = h_pq - 1/2 sum_r g_prrq``, absorbing the normal-ordering term."""
    return h - 0.5 * np.einsum("prrq->pq", g)


def spin_expand(k: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expand spatial integrals to interleaved spin orbitals."""
    n = k.shape[0]
    ks = np.zeros((2 * n, 2 * n))
    gs = np.zeros((2 * n,) * 4)
    for s in (0, 1):
        ks[s::2, s::2] = k
        for t in (0, 1):
            gs[s::2, s::2, t::2, t::2] = g
    return ks, gs


def hamiltonian_pauli_sum(mol: MolecularHamiltonian, tol: float = CUTOFF) -> PauliSum:
    """JW image of the molecular Hamiltonian as a (real-coefficient) Pauli sum."""
    n = mol.n_spin_orbitals
    out = PauliSum.identity(n, mol.e_nuc)
    for p, q in itertools.product(range(n), repeat=2):
        if abs(mol.k[p, q]) >= tol:
            out = out + excitation_pauli(p, q, n) * mol.k[p, q]
    for p, q in itertools.product(range(n), repeat=2):
        block = mol.g[p, q]
        if not np.any(np.abs(block) >= tol):
            continue
        right = PauliSum(n)
        for r, s in itertools.product(range(n), repeat=2):
            if abs(block[r, s]) >= tol:
                right = right + excitation_pauli(r, s, n) * (0.5 * block[r, s])
        out = out + excitation_pauli(p, q, n) * right
    return out.simplify(tol)


def assemble_hamiltonian(mol: MolecularHamiltonian) -> LcuOperator:
    """LCU form of the molecular Hamiltonian (identity term included)."""
    return LcuOperator.from_pauli_sum(hamiltonian_pauli_sum(mol))


@lru_cache(maxsize=None)
def one_body_observable(p: int, q: int, n_qubits: int) -> PauliSum:
    """Hermitian part ``(E_pq + E_qp)/2`` as a Pauli sum."""
    op = (excitation_pauli(p, q, n_qubits) + excitation_pauli(q, p, n_qubits)) * 0.5
    return op.real().simplify()


@lru_cache(maxsize=None)
def two_body_observable(p: int, q: int, r: int, s: int, n_qubits: int) -> PauliSum:
    """Hermitian part ``(E_pq E_rs + E_sr E_qp)/2`` as a Pauli sum."""
    a = excitation_pauli(p, q, n_qubits) * excitation_pauli(r, s, n_qubits)
    return ((a + a.adjoint()) * 0.5).real().simplify()


def hartree_fock_index(n_electrons: int) -> int:
    """Basis index with the lowest ``n_electrons`` spin orbitals occupied."""
    return (1 << n_electrons) - 1
