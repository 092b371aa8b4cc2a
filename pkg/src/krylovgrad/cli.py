"""Command-line interface: ``krylovgrad {energy,gradient,qsp-phases,bench-variance,check}``.

Exit codes: 0 success, 1 failed self-check, 2 bad or missing input,
3 solver failure, 4 post-selection success probability below the floor.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .gradients import (GradientProblem, LowSuccessError, analytic_gradient_variance,
                        benchmark_csv, ensemble_gradient, measure_rdms, nuclear_gradient,
                        variance_benchmark)
from .ingest import ParseError, load_config, parse_derivatives, read_fcidump
from .krylov import (EmptySubspaceError, KrylovProblem, count_distinct_measurements,
                     direct_energy_derivative, sector_ground_energy)
from .operators import MolecularHamiltonian, hamiltonian_pauli_sum, hartree_fock_index
from .qsp import (PhaseFitError, TargetPolynomial, fit_phases, load_phase_cache,
                  prepare_krylov_state, save_phase_cache, compute_eta)
from .simulator import RegisterError, StateVector, max_qubits

log = logging.getLogger("krylovgrad")

EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER, EXIT_PSUCCESS = 1, 2, 3, 4


class InputError(Exception):
    pass


def _g(v) -> str:
    return f"{v:.12g}"


def _read(path: str | None, what: str) -> str:
    if path is None:
        raise InputError(f"--{what} is required for this command")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} file not found: {p}")
    return p.read_text()


def _list(text, cast):
    if text is None:
        return None
    return [cast(v) for v in text.replace(",", " ").split()]


def _config(args):
    shots = args.shots
    if shots is not None and shots != "analytic":
        try:
            shots = int(shots)
        except ValueError:
            raise InputError(f"--shots must be 'analytic' or an integer, got {shots!r}") from None
    try:
        return load_config(args.config, dim=args.dim, threshold=args.threshold, shots=shots,
                           ensemble=args.ensemble, state=args.state, estimator=args.estimator,
                           seed=args.seed, p_floor=args.p_floor, sweep_dim=_list(args.sweep_dim, int),
                           sweep_threshold=_list(args.sweep_threshold, float))
    except (ValueError, OSError) as exc:
        raise InputError(f"bad configuration: {exc}") from None


class System:
    """Parsed FCIDUMP plus the objects every command needs."""

    def __init__(self, text: str):
        self.dump = read_fcidump(text)
        self.mol = self.dump.to_hamiltonian()
        self.n = self.mol.n_spin_orbitals
        self.ref = hartree_fock_index(self.dump.nelec)
        self.hamiltonian = hamiltonian_pauli_sum(self.mol)
        self.psi0 = StateVector.basis(self.n, self.ref)
        self.krylov = KrylovProblem(self.hamiltonian, self.psi0)

    def exact_energy(self):
        if self.n > max_qubits():
            return None
        return sector_ground_energy(self.hamiltonian, self.ref)

    def derivative_operator(self, derivs, c: int):
        d = MolecularHamiltonian(self.n, float(derivs.de_nuc_dx[c]), derivs.dk_dx[c], derivs.dg_dx[c])
        return hamiltonian_pauli_sum(d)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_energy(args) -> int:
    cfg = _config(args)
    system = System(_read(args.fcidump, "fcidump"))
    exact = system.exact_energy()
    dims = cfg.sweep_dim or [cfg.dim]
    thresholds = cfg.sweep_threshold or [cfg.threshold]
    lines = [f"lambda_lcu {_g(system.krylov.lambda_lcu)}", f"identity_shift {_g(system.krylov.shift)}"]
    if exact is not None:
        lines.append(f"exact_sector_energy {_g(exact)}")
    table = ["D,s,rank,E0,delta,measurements"]
    for s in thresholds:
        for D in dims:
            sol = system.krylov.solve(D, s)
            energies = system.krylov.physical(sol.energies)
            e0 = energies[min(cfg.state, sol.rank - 1)]
            delta = abs(e0 - exact) if exact is not None else float("nan")
            table.append(f"{D},{_g(s)},{sol.rank},{_g(e0)},{_g(delta)},"
                         f"{count_distinct_measurements(D, 'energy')}")
            if len(dims) * len(thresholds) == 1:
                lines.append(f"D {D} s {_g(s)} rank {sol.rank}")
                lines.append("energies " + " ".join(_g(e) for e in energies))
                lines.append("overlap_eigenvalues " + " ".join(_g(v) for v in sol.overlap_eigenvalues))
                lines.append(f"delta {_g(delta)}")
                lines.append(f"distinct_measurements {count_distinct_measurements(D, 'energy')}")
    _emit("\n".join(lines + table) + "\n", args.out)
    return 0


def cmd_gradient(args) -> int:
    cfg = _config(args)
    system = System(_read(args.fcidump, "fcidump"))
    derivs = parse_derivatives(_read(args.derivs, "derivs"), n_orbitals=system.dump.norb)
    sol = system.krylov.solve(cfg.dim, cfg.threshold)
    report = {"D": cfg.dim, "s": cfg.threshold, "state": cfg.state, "method": cfg.estimator,
              "labels": list(derivs.labels),
              "energy": float(system.krylov.physical(sol.energies[cfg.state]))}
    if cfg.estimator == "direct":
        vals = [direct_energy_derivative(system.hamiltonian, system.psi0, cfg.dim, cfg.threshold,
                                         system.derivative_operator(derivs, c), m=cfg.state,
                                         basis="chebyshev") for c in range(len(derivs.labels))]
        report.update(values=vals, variance=[0.0] * len(vals),
                      measurements=count_distinct_measurements(cfg.dim, "direct-gradient"))
    else:
        cache = load_phase_cache(args.phase_cache) if args.phase_cache else {}
        target = TargetPolynomial(sol.coefficient(cfg.state))
        prep = prepare_krylov_state(system.krylov.be, system.psi0, target, cache)
        if args.phase_cache:
            save_phase_cache(args.phase_cache, cache)
        rdm = measure_rdms(prep, cfg.estimator, p_floor=cfg.p_floor)
        if cfg.shots == "analytic":
            res = nuclear_gradient(rdm, derivs)
            var = analytic_gradient_variance(rdm, derivs)
            report.update(values=res.values.tolist(), variance=var.tolist())
        else:
            res = ensemble_gradient(rdm, derivs, cfg.ensemble, cfg.shot_count, cfg.seed)
            report.update(values=res.values.tolist(), mean=res.mean.tolist(),
                          variance=res.variance.tolist())
        report.update(eta=target.eta, eta_prepared=prep.eta, p_success=prep.p_success)
    _emit(json.dumps(_round(report), indent=1) + "\n", args.out)
    return 0


def _round(obj):
    if isinstance(obj, float):
        return float(_g(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def cmd_qsp_phases(args) -> int:
    cfg = _config(args)
    system = System(_read(args.fcidump, "fcidump"))
    sol = system.krylov.solve(cfg.dim, cfg.threshold)
    target = TargetPolynomial(sol.coefficient(cfg.state))
    out = {"D": cfg.dim, "s": cfg.threshold, "eta": target.eta,
           "coefficients": target.coefficients.tolist(), "parts": []}
    for part in (target.even, target.odd):
        if not np.any(part):
            continue
        scale = compute_eta(part)
        pf = fit_phases(part / (scale * (1 + 1e-8)))
        d = pf.to_dict()
        d["scale"] = scale * (1 + 1e-8)
        out["parts"].append(d)
    _emit(json.dumps(_round(out), indent=1) + "\n", args.out)
    return 0


def cmd_bench_variance(args) -> int:
    cfg = _config(args)
    system = System(_read(args.fcidump, "fcidump"))
    derivs = parse_derivatives(_read(args.derivs, "derivs"), n_orbitals=system.dump.norb)
    exact = system.exact_energy()
    problem = GradientProblem(system.hamiltonian, system.psi0, derivs, exact)
    estimators = [args.estimator] if args.estimator in ("post", "coherent") else ["post", "coherent"]
    cache = load_phase_cache(args.phase_cache) if args.phase_cache else {}
    rows = variance_benchmark(cfg, problem, estimators, cache)
    if args.phase_cache:
        save_phase_cache(args.phase_cache, cache)
    _emit(benchmark_csv(rows), args.out)
    return 0


def builtin_fcidump() -> str:
    return resources.files("krylovgrad").joinpath("data/h2_2o.fcidump").read_text()


def builtin_derivs() -> str:
    return resources.files("krylovgrad").joinpath("data/h2_2o.derivs").read_text()


def run_checks() -> list[tuple[str, bool, str]]:
    """Invariant suite on the bundled 2-orbital problem."""
    system = System(builtin_fcidump())
    derivs = parse_derivatives(builtin_derivs(), n_orbitals=system.dump.norb)
    exact = system.exact_energy()
    results = []

    def record(name, ok, detail):
        results.append((name, bool(ok), detail))

    mono = system.krylov.matrices(4, "monomial")
    hankel = max(abs(mono.h_tilde[i, j] - mono.h_tilde[i + 1, j - 1])
                 for i in range(3) for j in range(1, 4))
    record("hankel", hankel == 0.0, f"max shift mismatch {hankel:.3g}")
    sol = system.krylov.solve(2, 0.0)
    e0 = float(system.krylov.physical(sol.energies[0]))
    record("exact-limit", abs(e0 - exact) <= 1e-9, f"|E0 - exact| = {abs(e0 - exact):.3g}")
    c = sol.coefficient(0)
    S = system.krylov.matrices(2).s_tilde
    record("s-orthonormal", abs(c @ S @ c - 1) <= 1e-8, f"c^T S c - 1 = {c @ S @ c - 1:.3g}")
    prep = prepare_krylov_state(system.krylov.be, system.psi0, TargetPolynomial(c))
    ref = system.krylov.state(sol)
    err = np.abs(prep.eta * prep.block() - ref).max()
    record("qsp-block", err <= 1e-8, f"max block error {err:.3g}")
    record("p-success", abs(prep.p_success * prep.eta ** 2 - 1) <= 1e-8,
           f"p * eta^2 = {prep.p_success * prep.eta ** 2:.12g}")
    rdms = {est: measure_rdms(prep, est) for est in ("exact", "post", "coherent")}
    diff = max(np.abs(rdms["coherent"].gamma - rdms["post"].gamma).max(),
               np.abs(rdms["coherent"].Gamma - rdms["post"].Gamma).max())
    record("coherent-identity", diff <= 1e-9, f"max |coherent - post| = {diff:.3g}")
    trace = np.trace(rdms["exact"].gamma)
    record("gamma-trace", abs(trace - system.dump.nelec) <= 1e-8, f"trace = {trace:.12g}")
    g_rdm = nuclear_gradient(rdms["exact"], derivs).values
    g_dir = np.array([direct_energy_derivative(system.hamiltonian, system.psi0, 2, 0.0,
                                               system.derivative_operator(derivs, i))
                      for i in range(len(derivs.labels))])
    gd = np.abs(g_rdm - g_dir).max()
    record("gradient-routes", gd <= 1e-7, f"max |rdm - direct| = {gd:.3g}")
    return results


def cmd_check(args) -> int:
    results = run_checks()
    for name, ok, detail in results:
        sys.stdout.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    return 0 if all(ok for _, ok, _ in results) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krylovgrad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--fcidump")
        p.add_argument("--derivs")
        p.add_argument("--config")
        p.add_argument("--dim", type=int)
        p.add_argument("--threshold", type=float)
        p.add_argument("--estimator", choices=["exact", "post", "coherent", "direct"])
        p.add_argument("--shots")
        p.add_argument("--ensemble", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--state", type=int)
        p.add_argument("--p-floor", type=float)
        p.add_argument("--sweep-dim")
        p.add_argument("--sweep-threshold")
        p.add_argument("--out")
        p.add_argument("--phase-cache")

    for name, func in (("energy", cmd_energy), ("gradient", cmd_gradient),
                       ("qsp-phases", cmd_qsp_phases), ("bench-variance", cmd_bench_variance),
                       ("check", cmd_check)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ParseError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except LowSuccessError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PSUCCESS
    except (EmptySubspaceError, PhaseFitError, RegisterError, IndexError) as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
