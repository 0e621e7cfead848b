"""Print the continuum densities of the reference cutoff potential at F = I.

The bulk density, the surface densities for a few facets and the interface
densities for a unit shear across the (001) plane are compared against their
closed forms.
"""

from __future__ import annotations

import numpy as np

from cellavg import builtin_potential, cauchy_born_W
from cellavg.energy import gamma, gamma_diamond, sigma, tau

phi = builtin_potential("quadratic_cutoff", cutoff=2.0)
I = np.eye(3)
r2, r3 = np.sqrt(2), np.sqrt(3)

print(f"W(I)            = {cauchy_born_W(phi, I):.10f}   closed form {67 - 24*r2 - 16*r3:.10f}")
for m in [(1, 0, 0), (1, 1, 0), (1, 1, 1)]:
    n = np.array(m, float) / np.linalg.norm(m)
    print(f"gamma({m})  = {gamma(phi, I, n):+.10f}   gamma_diamond = {gamma_diamond(phi, I, m):+.10f}")

shear = I + np.outer([1, 0, 0], [0, 0, 1])
s, sh = sigma(phi, shear, I, [0, 0, 1])
t, th = tau(phi, shear, I, (0, 0, 1))
print(f"sigma_hat       = {sh:.10f}   tau_hat = {th:.10f}   closed form {53 - 16*r2 - 16*r3:.10f}")
print(f"sigma           = {s:.10f}   tau     = {t:.10f}")
