"""Facet densities along the Miller sequence (1, 1, j) approaching (0, 0, 1).

The facet density gap decays like 1/|m_j| while the interface density tends
to the smooth-plane value.
"""

from __future__ import annotations

import numpy as np

from cellavg import builtin_potential
from cellavg.asymptotics import miller_limit_study

phi = builtin_potential("quadratic_cutoff", cutoff=2.0)
study = miller_limit_study(phi, np.eye(3), (0, 0, 1), 40, a=[0.3, 0.0, 0.0])
print(f"W = {study.W:.6f}  c_gamma = {study.c_gamma:.3g}  log-log slope = {study.gamma_slope:.3f}")
for row in study.rows[::5] + [study.rows[-1]]:
    print(f"j={row.j:3d} m={row.miller}  |m|={row.norm:7.3f}  gamma gap={row.gamma_gap:.3e}"
          f"  bound={study.bound(row):.3e}  tau gap={row.tau_gap:.3e}")
