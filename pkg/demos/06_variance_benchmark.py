"""Gradient variance, eta and energy error over a Krylov dimension sweep.

Writes the benchmark table as CSV to stdout. At s = 1e-3 coherent estimation
sits below post-selection by roughly a factor of two. Lower thresholds buy
accuracy at the price of larger eta, which post-selection pays for steeply.
"""

import sys

from krylovgrad import GradientProblem, RunConfig, variance_benchmark
from krylovgrad.gradients import benchmark_csv

from _data import load

op, psi0, derivs, e_exact, _ = load("h2o_4o")
cfg = RunConfig(dim=8, ensemble=100, seed=1234, sweep_dim=list(range(2, 9)),
                sweep_threshold=[1e-3, 1e-6, 1e-12])
rows = variance_benchmark(cfg, GradientProblem(op, psi0, derivs, e_exact), phase_cache={})
sys.stdout.write(benchmark_csv(rows))
