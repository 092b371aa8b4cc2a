"""Preparing the Krylov ground state with quantum signal processing.

The Krylov coefficients define a Chebyshev polynomial p. Its even and odd parts
are each fitted by symmetric phase factors and recombined with two extra
ancillas. The all-zero ancilla block then holds p(H)|psi0> / eta, so success
probability falls as 1 / eta^2.
"""

import numpy as np

from krylovgrad import TargetPolynomial, prepare_krylov_state
from krylovgrad.simulator import chebyshev_vectors

from _data import load

_, psi0, _, _, prob = load("h2o_4o")
for s in (1e-3, 1e-8):
    for D in (2, 4, 6):
        sol = prob.solve(D, s)
        c = sol.coefficient(0)
        prep = prepare_krylov_state(prob.be, psi0, TargetPolynomial(c))
        ref = c @ chebyshev_vectors(prob.be, psi0, D - 1) / prep.eta
        err = np.abs(prep.block() - ref).max()
        print(f"s={s:g} D={D}: eta_inf={prep.eta_inf:8.4f} eta={prep.eta:8.4f} "
              f"p_success={prep.p_success:.4f} block error={err:.1e}")
