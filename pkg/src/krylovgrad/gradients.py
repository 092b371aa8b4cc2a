"""RDM measurement on prepared Krylov states, nuclear gradients and the
Gaussian-resampling variance benchmark.

Conventions:
    gamma[p, q]       = <E_pq>, measured as the hermitian part (E_pq + E_qp)/2
    Gamma[p, q, r, s] = <E_pq E_rs>, measured as its hermitian part
    dE/dx = sum gamma dk + 1/2 sum Gamma dg + dE_nuc
The 1/2 of the two-body term lives only in :func:`nuclear_gradient`.

Variances are single-shot values; divide by the shot count for sampled runs.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .ingest import IntegralDerivatives, RunConfig
from .krylov import KrylovProblem
from .operators import PauliSum, one_body_observable, two_body_observable
from .qsp import PreparedState, TargetPolynomial, prepare_krylov_state
from .simulator import StateVector, _apply_single, _indices

log = logging.getLogger(__name__)

P_FLOOR = 1e-6
IMAG_TOL = 1e-9


class LowSuccessError(RuntimeError):
    """Post-selection success probability below the configured floor."""


class PauliMoments:
    """Cached Pauli-string statistics of a prepared state.

    For a system Pauli string ``P`` it stores
        ``block``: <b|P|b> with ``b`` the unnormalized all-zero ancilla block,
        ``o1``:    <state|P|state> over the full register,
        ``o2``:    <state|R_0 P|state> with ``R_0 = 2|0><0|_a - 1``.
    """

    def __init__(self, prep: PreparedState):
        self.prep = prep
        n = prep.state.n_system
        self.n = n
        v = prep.state.blocks()                      # (ancilla, system)
        self._rho_full = v.T @ v.conj()              # sum_a |v_a><v_a|
        b = v[0]
        self._rho_block = np.outer(b, b.conj())
        self._idx = _indices(n)
        self._cache: dict[tuple[int, int], tuple[float, float]] = {}

    def _trace(self, rho, x, z):
        # tr(P rho) = sum_j (P rho)_jj with P applied to each column
        m = _apply_single(rho.T, self._idx, 1.0, x, z)
        return np.trace(m)

    def moments(self, x: int, z: int) -> tuple[float, float]:
        key = (x, z)
        hit = self._cache.get(key)
        if hit is None:
            blk = self._trace(self._rho_block, x, z)
            o1 = self._trace(self._rho_full, x, z)
            for val in (blk, o1):
                if abs(val.imag) > IMAG_TOL:
                    raise ValueError("Pauli expectation value is not real")
            hit = (float(blk.real), float(o1.real))
            self._cache[key] = hit
        return hit

    def o1_o2(self, x: int, z: int) -> tuple[float, float]:
        blk, o1 = self.moments(x, z)
        return o1, 2 * blk - o1


def _pauli_items(op: PauliSum):
    for (x, z), w in op.items():
        if abs(w.imag) > IMAG_TOL:
            raise ValueError("observable has complex Pauli weights")
        yield x, z, float(w.real)


def rdm_element_postselect(prep: PreparedState, op: PauliSum, moments: PauliMoments | None = None,
                           p_floor: float = P_FLOOR) -> tuple[float, float]:
    """Post-selected estimate ``eta^2 sum_nu w_nu <b|P_nu|b>`` and its single-shot variance.

    The variance ``eta^4 sum_nu w_nu^2 (1 - mu_nu^2) / p`` uses the
    post-selected Pauli mean ``mu_nu = <b|P_nu|b> / p`` and charges the
    discarded shots through the division by ``p``.
    """
    p = prep.p_success
    if p < p_floor:
        raise LowSuccessError(f"success probability {p:.3e} below floor {p_floor:g}")
    moments = moments or PauliMoments(prep)
    eta2 = prep.eta ** 2
    value = var = 0.0
    for x, z, w in _pauli_items(op):
        blk, _ = moments.moments(x, z)
        value += w * blk
        if x or z:
            mu = blk / p
            var += w * w * max(1.0 - mu * mu, 0.0)
    return eta2 * value, eta2 * eta2 * var / p


def rdm_element_coherent(prep: PreparedState, op: PauliSum,
                         moments: PauliMoments | None = None) -> tuple[float, float]:
    """Coherent estimate ``eta^2 sum_nu w_nu (o1 + o2) / 2`` and its single-shot variance.

    ``P`` and ``R_0 P`` commute, so every shot yields both outcomes ``a, b``
    in ``{-1, 1}``; the per-shot estimator ``(a + b)/2`` has variance
    ``(Var a + Var b + 2 Cov(a, b)) / 4`` with ``E[ab] = <R_0> = 2p - 1``.
    """
    moments = moments or PauliMoments(prep)
    eta2 = prep.eta ** 2
    r0 = 2 * prep.p_success - 1
    value = var = 0.0
    for x, z, w in _pauli_items(op):
        o1, o2 = moments.o1_o2(x, z)
        value += w * (o1 + o2) / 2
        if x or z:
            single = (1 - o1 * o1) + (1 - o2 * o2) + 2 * (r0 - o1 * o2)
            var += w * w * max(single, 0.0) / 4
    return eta2 * value, eta2 * eta2 * var


def rdm_element_exact(krylov_vec: np.ndarray, op: PauliSum) -> float:
    """``<Psi|O|Psi>`` for a system vector (dense reference path)."""
    n = op.n_qubits
    idx = _indices(n)
    acc = 0.0 + 0.0j
    for x, z, w in _pauli_items(op):
        acc += w * np.vdot(krylov_vec, _apply_single(krylov_vec, idx, 1.0, x, z))
    if abs(acc.imag) > IMAG_TOL:
        raise ValueError("expectation value is not real")
    return float(acc.real)


@dataclass(frozen=True)
class RdmPair:
    gamma: np.ndarray
    Gamma: np.ndarray
    gamma_var: np.ndarray
    Gamma_var: np.ndarray
    estimator: str

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def to_dict(self) -> dict:
        return {"estimator": self.estimator, "n_spin_orbitals": self.n,
                "gamma": self.gamma.ravel().tolist(), "gamma_var": self.gamma_var.ravel().tolist(),
                "Gamma": self.Gamma.ravel().tolist(), "Gamma_var": self.Gamma_var.ravel().tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RdmPair":
        n = d["n_spin_orbitals"]
        return cls(np.reshape(d["gamma"], (n, n)), np.reshape(d["Gamma"], (n,) * 4),
                   np.reshape(d["gamma_var"], (n, n)), np.reshape(d["Gamma_var"], (n,) * 4),
                   d["estimator"])


def spin_allowed(n: int):
    """Index tuples that a spin-conserving Hamiltonian can couple (interleaved spins)."""
    one = [(p, q) for p, q in itertools.product(range(n), repeat=2) if p % 2 == q % 2]
    two = [(p, q, r, s) for (p, q), (r, s) in itertools.product(one, repeat=2)]
    return one, two


def _canonical_one(p, q):
    return (min(p, q), max(p, q))


def _canonical_two(p, q, r, s):
    # the hermitized observable of (p,q,r,s) equals that of (s,r,q,p)
    return min((p, q, r, s), (s, r, q, p))


def measure_rdms(prep: PreparedState, estimator: str = "exact", n: int | None = None,
                 p_floor: float = P_FLOOR) -> RdmPair:
    """One- and two-particle RDMs of the prepared Krylov state.

    Only spin-allowed elements are measured; the rest are zero with zero
    variance. ``exact`` evaluates the normalized Krylov state directly.
    """
    n = n or prep.state.n_system
    if estimator not in ("exact", "post", "coherent"):
        raise ValueError(f"unknown estimator {estimator!r}")
    moments = PauliMoments(prep)
    psi = prep.krylov_state()

    def evaluate(op):
        if estimator == "exact":
            return rdm_element_exact(psi, op), 0.0
        if estimator == "post":
            return rdm_element_postselect(prep, op, moments, p_floor)
        return rdm_element_coherent(prep, op, moments)

    one, two = spin_allowed(n)
    g1, v1 = np.zeros((n, n)), np.zeros((n, n))
    g2, v2 = np.zeros((n,) * 4), np.zeros((n,) * 4)
    seen: dict = {}
    for p, q in one:
        key = ("1",) + _canonical_one(p, q)
        if key not in seen:
            seen[key] = evaluate(one_body_observable(*key[1:], n))
        g1[p, q], v1[p, q] = seen[key]
    for p, q, r, s in two:
        key = ("2",) + _canonical_two(p, q, r, s)
        if key not in seen:
            seen[key] = evaluate(two_body_observable(*key[1:], n))
        g2[p, q, r, s], v2[p, q, r, s] = seen[key]
    return RdmPair(g1, g2, v1, v2, estimator)


@dataclass(frozen=True)
class GradientResult:
    labels: list
    values: np.ndarray
    method: str
    mean: np.ndarray | None = None
    variance: np.ndarray | None = None

    @property
    def total_variance(self) -> float:
        return float(np.sum(self.variance)) if self.variance is not None else 0.0


def nuclear_gradient(rdm: RdmPair, derivs: IntegralDerivatives) -> GradientResult:
    """Chain-rule contraction ``sum gamma dk + 1/2 sum Gamma dg + dE_nuc`` per coordinate."""
    n = rdm.gamma.shape[0]
    if derivs.dk_dx.shape[1:] != (n, n) or derivs.dg_dx.shape[1:] != (n,) * 4:
        raise ValueError(f"derivative shapes {derivs.dk_dx.shape[1:]} do not match {n} spin orbitals")
    vals = (np.einsum("pq,cpq->c", rdm.gamma, derivs.dk_dx)
            + 0.5 * np.einsum("pqrs,cpqrs->c", rdm.Gamma, derivs.dg_dx)
            + np.asarray(derivs.de_nuc_dx, dtype=float))
    return GradientResult(list(derivs.labels), vals, rdm.estimator)


def analytic_gradient_variance(rdm: RdmPair, derivs: IntegralDerivatives, shots: int = 1) -> np.ndarray:
    """Per-coordinate variance of the chain-rule gradient from element variances.

    Symmetry partners share one measurement, so their contraction weights are
    summed before squaring.
    """
    n = rdm.n
    one, two = spin_allowed(n)
    out = np.zeros(len(derivs.labels))
    for c in range(len(derivs.labels)):
        weight: dict = {}
        var: dict = {}
        for p, q in one:
            key = ("1",) + _canonical_one(p, q)
            weight[key] = weight.get(key, 0.0) + derivs.dk_dx[c, p, q]
            var[key] = rdm.gamma_var[key[1:]]
        for idx in two:
            key = ("2",) + _canonical_two(*idx)
            weight[key] = weight.get(key, 0.0) + 0.5 * derivs.dg_dx[(c,) + idx]
            var[key] = rdm.Gamma_var[key[1:]]
        out[c] = sum(var[k] * w * w for k, w in weight.items()) / shots
    return out


def _realization_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed ^ i))


def sample_rdms(rdm: RdmPair, shots: int, seed: int, i: int) -> RdmPair:
    """One Gaussian realization centred on ``rdm`` with variance ``var / shots``.

    Each distinct measured observable is drawn once and copied to its
    symmetry partners.
    """
    rng = _realization_rng(seed, i)
    n = rdm.n
    one, two = spin_allowed(n)
    g1 = np.zeros_like(rdm.gamma)
    g2 = np.zeros_like(rdm.Gamma)
    draws: dict = {}
    for p, q in one:
        key = ("1",) + _canonical_one(p, q)
        if key not in draws:
            sd = np.sqrt(rdm.gamma_var[key[1:]] / shots)
            draws[key] = rdm.gamma[key[1:]] + sd * rng.standard_normal()
        g1[p, q] = draws[key]
    for idx in two:
        key = ("2",) + _canonical_two(*idx)
        if key not in draws:
            sd = np.sqrt(rdm.Gamma_var[key[1:]] / shots)
            draws[key] = rdm.Gamma[key[1:]] + sd * rng.standard_normal()
        g2[idx] = draws[key]
    return RdmPair(g1, g2, np.zeros_like(g1), np.zeros_like(g2), rdm.estimator)


def ensemble_gradient(rdm: RdmPair, derivs: IntegralDerivatives, ensemble: int, shots: int,
                      seed: int) -> GradientResult:
    """Gradient statistics over Gaussian RDM realizations (population variance)."""
    grads = np.array([nuclear_gradient(sample_rdms(rdm, shots, seed, i), derivs).values
                      for i in range(ensemble)])
    exact = nuclear_gradient(rdm, derivs).values
    return GradientResult(list(derivs.labels), exact, rdm.estimator,
                          grads.mean(axis=0), grads.var(axis=0))


@dataclass
class GradientProblem:
    """Everything the benchmark needs: Hamiltonian, reference state and integral derivatives."""

    hamiltonian: object
    psi0: StateVector
    derivs: IntegralDerivatives
    e_exact: float
    krylov: KrylovProblem = field(init=False)

    def __post_init__(self):
        self.krylov = KrylovProblem(self.hamiltonian, self.psi0)


BENCH_HEADER = ["D", "s", "estimator", "total_variance", "eta", "delta", "p_success"]


def variance_benchmark(config: RunConfig, problem: GradientProblem,
                       estimators=("post", "coherent"), phase_cache: dict | None = None) -> list[dict]:
    """Total gradient variance, eta, energy error and success probability per (D, s, estimator)."""
    dims = config.sweep_dim or [config.dim]
    thresholds = config.sweep_threshold or [config.threshold]
    rows = []
    for s in thresholds:
        for D in dims:
            sol = problem.krylov.solve(D, s)
            c = sol.coefficient(config.state)
            target = TargetPolynomial(c)
            prep = prepare_krylov_state(problem.krylov.be, problem.psi0, target, phase_cache)
            delta = abs(problem.krylov.physical(sol.energies[config.state]) - problem.e_exact)
            for est in estimators:
                rdm = measure_rdms(prep, est, p_floor=config.p_floor)
                res = ensemble_gradient(rdm, problem.derivs, config.ensemble, config.shot_count,
                                        config.seed)
                rows.append({"D": D, "s": s, "estimator": est,
                             "total_variance": res.total_variance, "eta": target.eta,
                             "delta": delta, "p_success": prep.p_success})
                log.info("D=%d s=%g %s total variance %.6g", D, s, est, res.total_variance)
    return rows


def _fmt(v) -> str:
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def benchmark_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in BENCH_HEADER])
    return buf.getvalue()
