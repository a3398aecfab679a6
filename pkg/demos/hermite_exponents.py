"""
Hermite profiles and information exponents
==========================================

Expand a few activations in the orthonormal Hermite basis, read off the
first non-zero coefficient, and look at the population loss it produces.
"""

# %%
import numpy as np

from sphere_sgd.hermite import (
    hermite_profile,
    information_exponent,
    supervised_population_profile,
)

names = ["linear", "relu", "sigmoid", "square", "abs", "hermite3", "hermite4"]
for name in names:
    prof = hermite_profile(name)
    head = ", ".join(f"{u:+.4f}" for u in prof.coefficients[:6])
    print(f"{name:>9}  k={information_exponent(prof)}  u_0..u_5 = {head}")

# %%
# Near the equator the population gradient behaves like -a m^(k-1):
# flat for k >= 3, which is what makes the search phase long.
m = np.linspace(0.0, 0.3, 4)
for name in ("linear", "square", "hermite3"):
    pop = supervised_population_profile(hermite_profile(name))
    print(f"{name:>9}  a={pop.drift_coefficient:.3f}  phi'(m) =",
          np.array2string(pop.phi_prime(m), precision=4))

# %%
# Polynomials given as coefficient lists work too: z^3 - 3z is sqrt(6) h_3.
prof = hermite_profile([0, -3, 0, 1], truncation_order=6)
print(np.round(prof.coefficients, 12))
