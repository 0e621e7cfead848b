"""Surface term of the discrete energy of the unit cube.

With eps = 1/k the lattice points of the closed cube give an energy whose
first-order coefficient is six times the facet density of the (001) face.
"""

from __future__ import annotations

import numpy as np

from cellavg import box, builtin_potential
from cellavg.asymptotics import epsilon_schedule, verify_proposition
from cellavg.material import Affine

phi = builtin_potential("quadratic_cutoff", cutoff=2.0)
rep = verify_proposition("P4", box([0, 0, 0], [1, 1, 1]), phi, Affine(np.eye(3)),
                         schedule=epsilon_schedule("reciprocal", 4, 40))
print(rep.summary())
for k, eps, E, pred, res in rep.rows()[::6]:
    print(f"k={k:3d}  E={E:.8f}  prediction={pred:.8f}  k*(E - prediction)={res:+.5f}")
