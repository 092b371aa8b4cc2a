"""The direct Krylov energy derivative against finite differences.

For H(theta) = H0 + theta V the derivative of the Krylov ground energy follows
from dH~ and dS~ alone. This route needs O(D^2) distinct measurements, versus
2D - 1 for the energy itself.
"""

import numpy as np

from krylovgrad import KrylovProblem, PauliSum, PauliTerm, StateVector, count_distinct_measurements
from krylovgrad import direct_energy_derivative

rng = np.random.default_rng(11)
n = 3


def random_sum(k):
    terms = []
    while len(terms) < k:
        label = "".join(rng.choice(list("IXYZ"), n))
        if label.count("Y") % 2 == 0 and set(label) != {"I"}:
            terms.append((float(rng.normal()), PauliTerm.from_label(label)))
    return PauliSum.from_terms(n, terms)


H0, V = random_sum(8), random_sum(5)
v = rng.normal(size=1 << n)
psi0 = StateVector.from_system(v / np.linalg.norm(v), n)
h = 1e-5
print("  D   basis       direct           finite diff      |diff|    measurements")
for D in (2, 3, 4):
    for basis in ("monomial", "chebyshev"):
        def energy(t):
            p = KrylovProblem(H0 + V * t, psi0)
            return float(p.physical(p.solve(D, 0.0, basis).energies[0]))

        fd = (energy(h) - energy(-h)) / (2 * h)
        dd = direct_energy_derivative(H0, psi0, D, 0.0, V, basis=basis)
        m = count_distinct_measurements(D, "direct-gradient")
        print(f"  {D}   {basis:9s}  {dd:15.10f}  {fd:15.10f}  {abs(dd - fd):.1e}  {m:5d}")
