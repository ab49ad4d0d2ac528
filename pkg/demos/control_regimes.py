"""
Effective Hamiltonians under control
====================================

A controller shifts the step probability by at most delta/2 and wants to
make the exponential cost small.  Depending on delta and beta there are four
shapes of the limiting cost per step.  Here we print each closed form next
to the finite-horizon Bellman value u(n, 0)/n and write the curves to CSV.
"""
import sys

import numpy as np

from crwalk.bellman import ControlProblem, solve
from crwalk.effham import K_delta, effham_rows, regime_of, rows_to_csv, threshold_delta
from crwalk.env import make_environment
from crwalk.tfe import free_energy

env = make_environment("iid", {"p": 0.5, "half_width": 50_000}, seed=42)
mean_v = env.mean()
n = 4000

cases = [(0.0, 1.0), (0.5, 1.0), (0.95, 1.0), (1.0, 1.0)]
print(f"convex iff delta <= {threshold_delta(1.0):.4f} at beta = 1\n")
print(" delta  regime   theta   H_bar     u(n,0)/n")
for delta, beta in cases:
    lam = free_energy(env, beta)
    rows = effham_rows(delta, beta, mean_v, lam, [0.3, 2.0])
    for row in rows:
        u = solve(ControlProblem(env, delta, beta, row["theta"], n)).value / n
        print(f" {delta:5.2f}  {row['regime']:7s} {row['theta']:5.2f}  {row['H_bar']:8.4f}  {u:8.4f}")

# Two rows converge slowly: the weak plateau (delta = 0.5, theta = 0.3) and
# delta = 0.95, theta = 2, where |theta| - c lies inside the flat part of
# Lambda.  Both values come from staying on hills of V = 1, and a
# Bernoulli(1/2) potential only offers short hills within reach of n steps.
grid = np.round(np.arange(-3, 3.001, 0.05), 10)
lam = free_energy(env, 1.0)
with open("control_regimes.csv", "w") as fh:
    for delta in (0.0, 0.5, 0.95, 1.0):
        fh.write(rows_to_csv(effham_rows(delta, 1.0, mean_v, lam, grid)))
print("\nwrote control_regimes.csv", file=sys.stderr)
print("K_delta well depth at theta = c:", K_delta(np.arctanh(0.5), 0.5))
