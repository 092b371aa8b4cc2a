"""Nuclear gradients from measured reduced density matrices.

The gradient is sum gamma dk + 1/2 sum Gamma dg + dE_nuc. Each RDM element can
be estimated by post-selecting the ancillas on zero, or coherently from two
full-register expectation values that need no post-selection.
"""

from krylovgrad import measure_rdms, nuclear_gradient, prepare_krylov_state
from krylovgrad.gradients import analytic_gradient_variance

from _data import load

_, psi0, derivs, _, prob = load("h2o_4o")
sol = prob.solve(4, 1e-3)
prep = prepare_krylov_state(prob.be, psi0, sol.coefficient(0))
print(f"D=4 s=1e-3  eta={prep.eta:.4f}  p_success={prep.p_success:.4f}")
for est in ("exact", "post", "coherent"):
    rdm = measure_rdms(prep, est)
    g = nuclear_gradient(rdm, derivs)
    var = analytic_gradient_variance(rdm, derivs)
    cells = "  ".join(f"{lab}={val:+.6f} (var {v:.3g})" for lab, val, v in zip(g.labels, g.values, var))
    print(f"{est:9s} {cells}")
