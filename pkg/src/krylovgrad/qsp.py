"""Chebyshev target polynomials, QSP phase factors and the emulated
state-preparation circuit.

Phase convention: for phases ``(phi_0, ..., phi_d)``

    U(x) = exp(i(phi_0 - pi/4) Z) W(x) exp(i phi_1 Z) ... W(x) exp(i(phi_d + pi/4) Z)

with ``W(x) = exp(i arccos(x) Y) = [[x, s], [-s, x]]``, ``s = sqrt(1 - x^2)``. The
encoded polynomial is the top-left entry ``P(x)``. For ``d = 0`` only the leading
factor remains.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import least_squares, minimize_scalar

from .simulator import BlockEncoding, RegisterError, StateVector, max_qubits

log = logging.getLogger(__name__)

GRID_NODES = 4096
SAFETY = 1e-8
FIT_TOL = 1e-10
MAX_ITER = 10_000
PARITY_TOL = 1e-14


class PhaseFitError(RuntimeError):
    """Phase optimization did not reach the residual threshold."""


def compute_eta(coeffs) -> float:
    """Infinity norm of ``sum_i c_i T_i`` over ``[-1, 1]``.

    Dense Chebyshev-node grid plus endpoints, then bounded golden-section/parabolic
    refinement between the neighbours of every local maximum on the grid (a
    nearly flat polynomial can hide its extremum between nodes).
    """
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0 or not np.any(c):
        raise ValueError("all-zero coefficients")
    k = np.arange(GRID_NODES)
    grid = np.concatenate(([-1.0], np.cos((2 * k + 1) * np.pi / (2 * GRID_NODES))[::-1], [1.0]))
    vals = np.abs(C.chebval(grid, c))
    padded = np.concatenate(([-np.inf], vals, [-np.inf]))
    peaks = np.flatnonzero((vals > padded[:-2]) & (vals >= padded[2:]))
    best = float(vals.max())
    for j in peaks:
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
        res = minimize_scalar(lambda x: -abs(C.chebval(x, c)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        best = max(best, -float(res.fun))
    return best


def _parity_parts(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    even = c.copy()
    even[1::2] = 0.0
    odd = c.copy()
    odd[0::2] = 0.0
    return even, odd


@dataclass(frozen=True)
class TargetPolynomial:
    """``f = (1/eta) sum_i c_i T_i`` for a Krylov coefficient vector ``c``."""

    coefficients: np.ndarray
    eta: float = field(default=0.0)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", c)
        if self.eta <= 0:
            object.__setattr__(self, "eta", compute_eta(c))

    @property
    def normalized(self) -> np.ndarray:
        return self.coefficients / self.eta

    @property
    def even(self) -> np.ndarray:
        return _parity_parts(self.coefficients)[0]

    @property
    def odd(self) -> np.ndarray:
        return _parity_parts(self.coefficients)[1]

    def __call__(self, x):
        return C.chebval(x, self.normalized)


def _degree(c: np.ndarray) -> int:
    nz = np.flatnonzero(np.abs(c) > PARITY_TOL * max(1.0, np.abs(c).max()))
    return int(nz[-1]) if nz.size else -1


def _phase_angles(phases: np.ndarray) -> np.ndarray:
    ang = np.array(phases, dtype=float)
    ang[0] -= np.pi / 4
    if ang.size > 1:
        ang[-1] += np.pi / 4
    return ang


def qsp_response(phases, x) -> np.ndarray:
    """Top-left entries ``P(x)`` for an array of points (vectorized)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > 1 + 1e-14):
        raise ValueError("|x| must be <= 1")
    x = np.clip(x, -1.0, 1.0)
    ang = _phase_angles(phases)
    s = np.sqrt(1.0 - x * x)
    # track the first row (a, b) of the running product from the left
    a = np.full(x.shape, np.exp(1j * ang[0]))
    b = np.zeros(x.shape, dtype=complex)
    for phi in ang[1:]:
        a, b = a * x - b * s, a * s + b * x
        a, b = a * np.exp(1j * phi), b * np.exp(-1j * phi)
    return a


def qsp_jacobian(phases, x) -> np.ndarray:
    """``dP(x_j)/dphi_k`` as an ``(len(x), d + 1)`` complex array."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ang = _phase_angles(phases)
    s = np.sqrt(1.0 - x * x)
    m, n = x.size, ang.size
    # prefix rows e0^T F_0 ... F_k with F_0 = Rz(ang_0), F_k = W Rz(ang_k)
    rows = np.empty((n, m, 2), dtype=complex)
    a = np.full(m, np.exp(1j * ang[0]))
    b = np.zeros(m, dtype=complex)
    rows[0] = np.stack((a, b), -1)
    for k in range(1, n):
        a, b = a * x - b * s, a * s + b * x
        a, b = a * np.exp(1j * ang[k]), b * np.exp(-1j * ang[k])
        rows[k] = np.stack((a, b), -1)
    # suffix columns F_{k+1} ... F_d e0
    cols = np.empty((n, m, 2), dtype=complex)
    u = np.ones(m, dtype=complex)
    v = np.zeros(m, dtype=complex)
    cols[n - 1] = np.stack((u, v), -1)
    for k in range(n - 1, 0, -1):
        u, v = u * np.exp(1j * ang[k]), v * np.exp(-1j * ang[k])
        u, v = x * u + s * v, -s * u + x * v
        cols[k - 1] = np.stack((u, v), -1)
    jac = 1j * (rows[..., 0] * cols[..., 0] - rows[..., 1] * cols[..., 1])
    return jac.T


def qsp_unitary_scalar(phases, x: float) -> np.ndarray:
    """The full 2x2 QSP unitary at a single point."""
    if abs(x) > 1:
        raise ValueError("|x| must be <= 1")
    ang = _phase_angles(phases)
    s = np.sqrt(1.0 - x * x)
    W = np.array([[x, s], [-s, x]], dtype=complex)

    def rz(p):
        return np.diag([np.exp(1j * p), np.exp(-1j * p)])

    U = rz(ang[0])
    for phi in ang[1:]:
        U = U @ W @ rz(phi)
    return U


@dataclass(frozen=True)
class PhaseFactors:
    degree: int
    phases: np.ndarray
    parity: str
    residual: float = 0.0
    scale: float = 1.0   # the fitted polynomial is target / scale

    def __post_init__(self):
        p = np.asarray(self.phases, dtype=float)
        if p.size != self.degree + 1:
            raise ValueError("need degree + 1 phases")
        object.__setattr__(self, "phases", p)

    def response(self, x) -> np.ndarray:
        return qsp_response(self.phases, x)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "parity": self.parity,
                "phases": [float(v) for v in self.phases],
                "residual": float(self.residual), "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseFactors":
        return cls(int(d["degree"]), np.asarray(d["phases"], dtype=float), d["parity"],
                   float(d.get("residual", 0.0)), float(d.get("scale", 1.0)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "PhaseFactors":
        return cls.from_dict(json.loads(text))


def _wrap(phases: np.ndarray) -> np.ndarray:
    return (phases + np.pi) % (2 * np.pi) - np.pi


def fit_nodes(d: int) -> np.ndarray:
    n = (d + 2) // 2
    j = np.arange(1, n + 1)
    return np.cos((2 * j - 1) * np.pi / (4 * n))


def fit_phases(target, d: int | None = None, tol: float = FIT_TOL) -> PhaseFactors:
    """Symmetric phases with ``Re P = f`` for a parity-definite Chebyshev series.

    Least squares on the positive Chebyshev nodes, starting from
    ``(pi/4, 0, ..., 0, pi/4)`` where ``Re P`` vanishes identically.
    """
    c = np.asarray(target, dtype=float)
    deg = _degree(c)
    if deg < 0:
        raise ValueError("zero target")
    if d is None:
        d = deg
    if deg > d:
        raise ValueError(f"target degree {deg} exceeds d={d}")
    wrong = c[(d + 1) % 2::2]
    if np.any(np.abs(wrong) > PARITY_TOL * max(1.0, np.abs(c).max())):
        raise ValueError(f"target parity does not match d={d}")
    parity = "even" if d % 2 == 0 else "odd"
    if d == 0:
        f0 = c[0]
        if abs(f0) > 1:
            raise ValueError("|target| exceeds 1")
        return PhaseFactors(0, np.array([_wrap(np.pi / 4 + np.arccos(f0))]), parity, 0.0)
    nodes = fit_nodes(d)
    want = C.chebval(nodes, c)
    if np.abs(want).max() > 1 + 1e-12:
        raise ValueError("|target| exceeds 1 on the fit grid")
    n_free = nodes.size

    def full(half):
        return np.concatenate((half, half[: (d + 1) - n_free][::-1]))

    def resid(half):
        return qsp_response(full(half), nodes).real - want

    def jac(half):
        J = qsp_jacobian(full(half), nodes).real
        out = J[:, :n_free].copy()
        mirror = (d + 1) - n_free
        out[:, :mirror] += J[:, n_free:][:, ::-1]
        return out

    x0 = np.zeros(n_free)
    x0[0] = np.pi / 4
    sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=MAX_ITER)
    res = float(np.linalg.norm(sol.fun))
    if res > tol:
        raise PhaseFitError(f"phase fit for degree {d} stalled at residual {res:.3e}")
    return PhaseFactors(d, _wrap(full(sol.x)), parity, res)


# register-level emulation ---------------------------------------------------

def _signal_phase(amps: np.ndarray, n_system: int, phi: float) -> np.ndarray:
    """``exp(i phi (2 Pi_0 - 1))`` with ``Pi_0`` projecting the ancillas onto zero."""
    dim = 1 << n_system
    out = amps * np.exp(-1j * phi)
    out[:dim] = amps[:dim] * np.exp(1j * phi)
    return out


def apply_qsp(be: BlockEncoding, state: StateVector, phases, conjugate: bool = False) -> StateVector:
    """Apply the phase sequence with the zero-flag walk operator as signal unitary.

    ``conjugate`` negates every rotation angle, which realizes the complex
    conjugate circuit for a real block encoding.
    """
    ang = _phase_angles(phases)
    if conjugate:
        if not be.is_real:
            raise ValueError("conjugate circuit needs a real block encoding")
        ang = -ang
    n = be.n_system
    v = StateVector(n, be.n_ancilla, _signal_phase(state.amplitudes, n, ang[-1]))
    for phi in ang[-2::-1]:
        v = be.apply_zero_iterate(v)
        v = StateVector(n, be.n_ancilla, _signal_phase(v.amplitudes, n, phi))
    return v


@dataclass(frozen=True)
class PreparedState:
    """Output of the state-preparation circuit.

    Ancilla layout (most significant first): parity selector, conjugation
    selector, block-encoding ancillas. The all-zero ancilla block equals
    ``sum_i c_i T_i(H)|psi0> / eta``.
    """

    state: StateVector
    eta: float           # normalization of the prepared block
    eta_inf: float       # infinity norm of the target polynomial
    p_success: float
    phases: tuple
    weights: tuple
    n_be_ancilla: int

    def block(self) -> np.ndarray:
        return self.state.amplitudes[: 1 << self.state.n_system].copy()

    def krylov_state(self) -> np.ndarray:
        return self.eta * self.block()


def prepare_krylov_state(be: BlockEncoding, psi0: StateVector, target: TargetPolynomial | np.ndarray,
                         phase_cache: dict | None = None) -> PreparedState:
    """Emulate the full preparation circuit for ``sum_i c_i T_i(H)|psi0>``.

    Each parity part ``p`` is fitted as ``p / n_p`` with ``n_p`` its infinity
    norm inflated by ``1 + SAFETY``. A conjugation ancilla in ``|+>`` turns the
    QSP block into its real part; a parity ancilla rotated to amplitudes
    ``sqrt(n_p / (n_even + n_odd))`` recombines both parts. The zero block is
    therefore ``p(H)|psi0> / (n_even + n_odd)``.
    """
    if not isinstance(target, TargetPolynomial):
        target = TargetPolynomial(np.asarray(target, dtype=float))
    if psi0.n_ancilla:
        raise ValueError("psi0 must be a system-register state")
    n, na = be.n_system, be.n_ancilla
    if n + na + 2 > max_qubits():
        raise RegisterError(f"{n + na + 2} qubits exceed the cap of {max_qubits()}")
    parts, norms, fits = [], [], []
    for part in (target.even, target.odd):
        if _degree(part) < 0:
            parts.append(None)
            norms.append(0.0)
            fits.append(None)
            continue
        nrm = compute_eta(part) * (1 + SAFETY)
        key = _cache_key(part / nrm)
        pf = phase_cache.get(key) if phase_cache is not None else None
        if pf is None:
            pf = fit_phases(part / nrm)
            if phase_cache is not None:
                phase_cache[key] = pf
        parts.append(part)
        norms.append(nrm)
        fits.append(pf)
    total = sum(norms)
    weights = tuple(nv / total for nv in norms)
    start = be.zero_flag_state(psi0)
    branch = np.zeros((2, 2, start.amplitudes.size), dtype=complex)
    for ci, pf in enumerate(fits):
        for ri in range(2):
            branch[ci, ri] = (apply_qsp(be, start, pf.phases, conjugate=bool(ri)).amplitudes
                              if pf is not None else start.amplitudes)
    sc, cc = np.sqrt(weights[0]), np.sqrt(weights[1])
    prep_c = np.array([sc, cc])                    # parity ancilla after its preparation
    unprep_c = np.array([[sc, cc], [-cc, sc]])     # inverse preparation
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    amp = np.einsum("c,r,ac,br,crv->abv", prep_c, np.full(2, 1 / np.sqrt(2)), unprep_c,
                    hadamard, branch)
    full = StateVector(n, na + 2, amp.reshape(-1))
    blk = full.amplitudes[: 1 << n]
    p = float(np.vdot(blk, blk).real)
    return PreparedState(full, total, target.eta, p, tuple(fits), weights, na)


def _cache_key(c: np.ndarray) -> str:
    return ",".join(f"{v:.15e}" for v in c)


def save_phase_cache(path, cache: dict) -> None:
    data = {k: v.to_dict() for k, v in sorted(cache.items())}
    Path(path).write_text(json.dumps(data, indent=1))


def load_phase_cache(path) -> dict:
    p = Path(path)
    if not p.exists():
        return {}
    return {k: PhaseFactors.from_dict(v) for k, v in json.loads(p.read_text()).items()}
