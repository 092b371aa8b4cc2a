"""Krylov energies as the dimension grows, for two overlap thresholds.

The Chebyshev basis T_k(H)|psi0> spans the same space as the monomial one but
is far better conditioned. Directions whose overlap eigenvalue falls below the
threshold s are discarded, which caps the retained rank.
"""

from krylovgrad import count_distinct_measurements

from _data import load

_, _, _, e_exact, prob = load("h2o_4o")
for s in (1e-3, 1e-8):
    print(f"threshold s = {s:g}")
    print("   D  rank            E0     |E0 - exact|  measurements")
    for D in range(1, 9):
        sol = prob.solve(D, s)
        e0 = float(prob.physical(sol.energies[0]))
        print(f"  {D:2d}  {sol.rank:4d}  {e0:14.8f}  {abs(e0 - e_exact):14.3e}  {count_distinct_measurements(D):5d}")
