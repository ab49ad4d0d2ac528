"""
Tilted free energy on two environments
======================================

Lambda(theta) is the growth rate of E[exp(beta sum V(X_i) + theta X_n)].
We compute it on an alternating potential, where it has a closed form, and
on a Bernoulli potential, where it is flat on an interval and has a corner
at the edge of that interval.
"""
import math

import numpy as np

from crwalk.corrector import nondifferentiability_check, rwre_profile
from crwalk.env import make_environment
from crwalk.tfe import free_energy, solve_lambda_direct, solve_lambda_implicit

beta = 1.0

# On V = 0, 1, 0, 1, ... every path spends exactly half its time at V = 1.
alt = make_environment("periodic", {"values": [0, 1]})
for theta in (0.0, 1.0, 2.0):
    res = solve_lambda_implicit(alt, beta, theta)
    print(f"alternating  theta={theta:.1f}  Lambda={res.lam:.10f}  "
          f"closed form={beta / 2 + math.log(math.cosh(theta)):.10f}")

# Bernoulli(1/2) on a window of 10^5 sites.
env = make_environment("iid", {"p": 0.5, "half_width": 50_000}, seed=42)
lam = free_energy(env, beta)
print("\n theta   Lambda    flat")
for theta in np.arange(0.0, 3.01, 0.25):
    r = solve_lambda_implicit(env, beta, theta)
    print(f" {theta:5.2f}  {r.lam:.6f}  {r.flat}")

# The direct finite-horizon DP approaches the same curve, slowly near the flat part.
for theta in (1.5, 3.0):
    d = solve_lambda_direct(env, beta, theta, n=4000)
    print(f"direct DP theta={theta}: " + ", ".join(f"n={k}: {v:.5f}" for k, v in d.dp_sequence)
          + f"   implicit {lam(theta):.5f}")

# The velocity of the tilted walk is the slope of Lambda.
for theta in (1.5, 2.5):
    v = rwre_profile(env, beta, theta).velocity
    fd = (lam(theta + 1e-5) - lam(theta - 1e-5)) / 2e-5
    print(f"theta={theta}: velocity {v:.8f}  slope {fd:.8f}")

kink = nondifferentiability_check(env, beta)
print(f"\nflat interval ends at theta_b = {kink['theta_b']:.6f}")
print(f"left slope {kink['residuals']['left_derivative']:.1e}, right quotient "
      f"{kink['right_quotient']:.4f} >= bound {kink['bound']:.4f}")
