"""
Excursions, confinement and hitting times
=========================================

The lower-bound arguments rest on a few facts about the simple walk.  Each is
computed two ways below.
"""
import math

from crwalk import walk

print("staying in 2 ell sites: spectral vs closed form")
for ell in (1, 3, 10):
    print(f"  ell={ell:2d}  {walk.confinement_spectral(ell):.12f}  {walk.confinement_exponent(ell):.12f}")

print("\nfirst passage to +1 and excursion return, series vs closed form")
for lam in (0.1, 0.5, math.log(math.cosh(1.0))):
    print(f"  lam={lam:.4f}  {walk.first_passage_series(lam):.10f} {walk.hitting_laplace_tau1(lam):.10f}"
          f"   {walk.excursion_laplace_series(lam):.10f} {walk.hitting_laplace_excursion(lam):.10f}")

print("\nexcursion count generating function, reflected chains approach log cosh c")
c = 1.0
for ell in (1, 2, 5, 10, 20):
    print(f"  ell={ell:2d}  J_ell={walk.excursion_J_ell(c, ell):.10f}")
print(f"  limit   J   ={walk.excursion_J(c):.10f}")
print(f"  free walk, n=4000: {walk.excursion_count_mgf(4000, c):.6f}")
