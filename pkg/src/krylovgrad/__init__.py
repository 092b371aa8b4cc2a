"""Krylov ground states prepared by quantum signal processing, with RDM-based
nuclear gradients, emulated on dense statevectors."""

from .gradients import (GradientProblem, GradientResult, LowSuccessError, RdmPair, ensemble_gradient,
                        measure_rdms, nuclear_gradient, variance_benchmark)
from .ingest import (Fcidump, IntegralDerivatives, ParseError, RunConfig, load_config,
                     parse_derivatives, parse_fcidump, read_fcidump)
from .krylov import (EmptySubspaceError, KrylovProblem, KrylovSolution, build_matrices,
                     count_distinct_measurements, direct_energy_derivative, sector_ground_energy, solve)
from .operators import (FermionOperator, LcuOperator, MolecularHamiltonian, PauliSum, PauliTerm,
                        hamiltonian_pauli_sum, jordan_wigner)
from .qsp import PhaseFactors, PhaseFitError, TargetPolynomial, compute_eta, fit_phases, prepare_krylov_state
from .simulator import BlockEncoding, RegisterError, StateVector

__version__ = "0.1.0"

__all__ = [
    "BlockEncoding", "EmptySubspaceError", "Fcidump", "FermionOperator", "GradientProblem",
    "GradientResult", "IntegralDerivatives", "KrylovProblem", "KrylovSolution", "LcuOperator",
    "LowSuccessError", "MolecularHamiltonian", "ParseError", "PauliSum", "PauliTerm", "PhaseFactors",
    "PhaseFitError", "RdmPair", "RegisterError", "RunConfig", "StateVector", "TargetPolynomial",
    "build_matrices", "compute_eta", "count_distinct_measurements", "direct_energy_derivative",
    "ensemble_gradient", "fit_phases", "hamiltonian_pauli_sum", "jordan_wigner", "load_config",
    "measure_rdms", "nuclear_gradient", "parse_derivatives", "parse_fcidump", "prepare_krylov_state",
    "read_fcidump", "sector_ground_energy", "solve", "variance_benchmark",
]
