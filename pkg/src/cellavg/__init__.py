"""Cell-averaged and discrete pair-potential energies of deformed crystal domains.

Bulk (Cauchy-Born), surface and interface densities, the small-eps
expansions they feed, and brute-force references to check them against.
"""

from .asymptotics import (
    ExpansionReport,
    epsilon_schedule,
    fit_expansion,
    miller_limit_study,
    modified_domain_check,
    verify_proposition,
)
from .energy import (
    DensityTable,
    EnergyBreakdown,
    cell_avg_energy,
    discrete_energy,
    gamma,
    gamma_diamond,
    predict_expansion,
    sigma,
    sigma_hat,
    surface_integral,
    tau,
    tau_hat,
    tau_hat_trapezoid,
    trapezoid_sum,
)
from .geometry import ConvexPolytope, InterfacePlane, box, from_halfspaces, hull
from .lattice import (
    CLOSED,
    HALF_OPEN,
    BravaisLattice,
    MillerVector,
    enumerate_ball,
    enumerate_in_region,
    integer_lattice,
    lattice_remainder,
    miller_sequence,
)
from .material import (
    Affine,
    NonInvertibleDeformationError,
    PairPotential,
    PiecewiseAffine,
    SmoothMap,
    builtin_potential,
    cauchy_born_W,
)
from .oracle import dense_path_integral, translate_average_count, translate_average_energy

__version__ = "0.1.0"
