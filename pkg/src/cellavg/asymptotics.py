"""Small-eps expansions: schedules, least-squares fits and convergence studies."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .energy import (
    cauchy_born_W,
    cell_avg_energy,
    discrete_energy,
    gamma,
    gamma_diamond,
    predict_expansion,
    sigma,
    tau,
)
from .geometry import ConvexPolytope, GeometryError, offset_facets, split_by_plane
from .lattice import CLOSED, BravaisLattice, enumerate_in_region, integer_lattice, miller_sequence
from .material import Affine, PairPotential, PiecewiseAffine, SmoothMap

__all__ = [
    "RECIPROCAL",
    "OFFSET",
    "PROPOSITIONS",
    "epsilon_schedule",
    "ExpansionReport",
    "fit_expansion",
    "verify_proposition",
    "MillerLimitRow",
    "MillerLimitStudy",
    "miller_limit_study",
    "ModifiedDomainRow",
    "modified_domain_check",
]

RECIPROCAL = "reciprocal"
OFFSET = "offset"
DEFAULT_THETA = 0.37
FIT_FRACTION = 0.6
PROPOSITIONS = ("P1", "P2", "P3", "P4", "P5")


def epsilon_schedule(kind: str = RECIPROCAL, k_min: int = 4, k_max: int = 40,
                     theta: float = DEFAULT_THETA) -> list[tuple[int, float]]:
    """``eps_k = 1/k`` (reciprocal) or ``1/(k + theta)`` (offset) for ``k_min <= k <= k_max``."""
    if not (2 <= k_min < k_max <= 200):
        raise ValueError(f"need 2 <= k_min < k_max <= 200, got {k_min}..{k_max}")
    if kind == RECIPROCAL:
        return [(k, 1.0 / k) for k in range(k_min, k_max + 1)]
    if kind == OFFSET:
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        return [(k, 1.0 / (k + theta)) for k in range(k_min, k_max + 1)]
    raise ValueError(f"unknown schedule kind {kind!r}")


@dataclass
class ExpansionReport:
    """Energies along a schedule next to the fitted and predicted expansion.

    `residuals` are ``(E - target_bulk - eps * target_first) / eps`` with
    ``target_first = target_surface + target_interface``; for a plain fit with
    no prediction the fitted coefficients take the place of the targets.
    """

    schedule: list[tuple[int, float]]
    energies: list[float]
    fitted_bulk: float
    fitted_surface: float
    residuals: list[float]
    target_bulk: float = float("nan")
    target_surface: float = float("nan")
    target_interface: float = 0.0
    convergence_order_estimate: float = float("nan")
    fitted_coefficients: list[float] = field(default_factory=list)
    kind: str = ""

    @property
    def predictions(self) -> list[float]:
        first = self.target_surface + self.target_interface
        return [self.target_bulk + eps * first for _, eps in self.schedule]

    def residual_decreasing(self, k_from: int) -> bool:
        """|scaled residual| strictly decreasing over the schedule entries with ``k >= k_from``."""
        r = [abs(x) for (k, _), x in zip(self.schedule, self.residuals) if k >= k_from]
        return len(r) >= 2 and all(b < a for a, b in zip(r[:-1], r[1:]))

    def rows(self) -> list[tuple]:
        return [(k, eps, e, p, r) for (k, eps), e, p, r
                in zip(self.schedule, self.energies, self.predictions, self.residuals)]

    def summary(self) -> dict:
        d = asdict(self)
        for key in ("schedule", "energies", "residuals"):
            d.pop(key)
        return d


def _scaled_residuals(eps, E, c0, c1):
    return [(e - c0 - x * c1) / x for x, e in zip(eps, E)]


def _order_estimate(eps, err):
    """Slope of log|err| against log eps over the second half of the points."""
    eps, err = np.asarray(eps), np.abs(np.asarray(err))
    keep = err > 0
    eps, err = eps[keep], err[keep]
    if len(eps) < 3:
        return float("nan")
    order = np.argsort(eps)[: max(3, len(eps) // 2)]
    return float(np.polyfit(np.log(eps[order]), np.log(err[order]), 1)[0])


def fit_expansion(points, model_order: int = 1, fit_fraction: float = 1.0) -> ExpansionReport:
    """Least-squares ``E ≈ c0 + c1 eps (+ c2 eps^2)`` over the smallest `fit_fraction` of the eps values.

    `points` is a sequence of ``(eps, E)`` or ``(k, eps, E)``.
    """
    if model_order not in (1, 2):
        raise ValueError("model_order must be 1 or 2")
    pts = [tuple(p) for p in points]
    if pts and len(pts[0]) == 3:
        schedule = [(int(k), float(e)) for k, e, _ in pts]
        E = [float(v) for *_, v in pts]
    else:
        schedule = [(0, float(e)) for e, _ in pts]
        E = [float(v) for _, v in pts]
    eps = np.array([e for _, e in schedule])
    if len(eps) < model_order + 2:
        raise ValueError(f"need at least {model_order + 2} points for order {model_order}")
    n_fit = max(model_order + 2, int(math.ceil(fit_fraction * len(eps))))
    sel = np.argsort(eps, kind="stable")[:n_fit]
    A = np.vander(eps[sel], model_order + 1, increasing=True)
    if np.linalg.matrix_rank(A) < model_order + 1:
        raise ValueError("rank-deficient design: eps values are not distinct enough")
    coef, *_ = np.linalg.lstsq(A, np.asarray(E)[sel], rcond=None)
    c0, c1 = float(coef[0]), float(coef[1])
    res = _scaled_residuals(eps, E, c0, c1)
    return ExpansionReport(
        schedule=schedule, energies=E, fitted_bulk=c0, fitted_surface=c1, residuals=res,
        convergence_order_estimate=_order_estimate(eps, np.asarray(res) * eps),
        fitted_coefficients=[float(c) for c in coef],
    )


# -- proposition checks ---------------------------------------------------------------

_KIND = {
    # energy, prediction kind for affine / smooth / piecewise maps
    "P1": ("cell", None),
    "P2": ("cell", None),
    "P3": ("cell", "cell_avg_interface"),
    "P4": ("discrete", "discrete_polyhedron"),
    "P5": ("discrete", "discrete_interface"),
}


def _check_scene(kind, domain, deformation):
    if kind not in _KIND:
        raise ValueError(f"unknown proposition {kind!r}; expected one of {PROPOSITIONS}")
    if kind == "P1" and not isinstance(deformation, (Affine, PiecewiseAffine)):
        raise ValueError("P1 runs on affine or piecewise-affine maps")
    if kind == "P2" and not isinstance(deformation, (Affine, SmoothMap)):
        raise ValueError("P2 needs an affine or smooth deformation")
    if kind in ("P3", "P5") and not isinstance(deformation, PiecewiseAffine):
        raise ValueError(f"{kind} needs a piecewise-affine deformation with an interface")
    if kind == "P4" and not isinstance(deformation, Affine):
        raise ValueError("P4 needs an affine deformation")
    if kind in ("P4", "P5") and not (domain.miller_normals or domain.is_lattice_polyhedron()):
        raise ValueError(f"{kind} needs a lattice polyhedron domain")
    if kind == "P5" and deformation.plane.miller is None:
        raise ValueError("P5 needs a crystallographic interface (Miller normal)")


def _prediction(kind, domain, potential, deformation, lattice, quad_order):
    if kind == "P1":
        if isinstance(deformation, PiecewiseAffine):
            return predict_expansion("cell_avg_interface", domain, potential, deformation, lattice)
        return predict_expansion("cell_avg_affine", domain, potential, deformation, lattice)
    if kind == "P2":
        return predict_expansion("cell_avg_smooth", domain, potential, deformation, lattice,
                                 quad_order=quad_order or 8)
    return predict_expansion(_KIND[kind][1], domain, potential, deformation, lattice)


def verify_proposition(kind: str, domain: ConvexPolytope, potential: PairPotential, deformation,
                       lattice: BravaisLattice | None = None, schedule=None,
                       rule: str = CLOSED, threads: int = 1, quad_order: int | None = None,
                       model_order: int = 2, fit_fraction: float = FIT_FRACTION) -> ExpansionReport:
    """Energies along `schedule` against the predicted bulk / surface / interface terms.

    P1-P3 use the cell-averaged energy, P4-P5 the discrete energy with boundary
    rule `rule`.  The schedule defaults to ``eps_k = 1/k``, k = 4..40, and is
    evaluated in parallel over k with `threads` workers.
    """
    lattice = lattice or integer_lattice()
    _check_scene(kind, domain, deformation)
    schedule = schedule or epsilon_schedule(RECIPROCAL, 4, 40)
    pred = _prediction(kind, domain, potential, deformation, lattice, quad_order)

    if _KIND[kind][0] == "cell":
        def energy(eps):
            return cell_avg_energy(domain, lattice, eps, deformation, potential, quad_order)
    else:
        def energy(eps):
            return discrete_energy(domain, lattice, eps, deformation, potential, rule)

    eps = [e for _, e in schedule]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            E = list(pool.map(energy, eps))
    else:
        E = [energy(e) for e in eps]

    fit = fit_expansion([(k, e, v) for (k, e), v in zip(schedule, E)], model_order, fit_fraction)
    first = pred.surface_prediction + pred.interface_prediction
    res = _scaled_residuals(eps, E, pred.bulk_prediction, first)
    return ExpansionReport(
        schedule=list(schedule), energies=E,
        fitted_bulk=fit.fitted_bulk, fitted_surface=fit.fitted_surface, residuals=res,
        target_bulk=pred.bulk_prediction, target_surface=pred.surface_prediction,
        target_interface=pred.interface_prediction,
        convergence_order_estimate=_order_estimate(eps, np.asarray(res) * np.asarray(eps)),
        fitted_coefficients=fit.fitted_coefficients, kind=kind,
    )


# -- Miller-index limits --------------------------------------------------------------

@dataclass
class MillerLimitRow:
    j: int
    miller: tuple[int, int, int]
    norm: float
    gamma_gap: float
    tau_gap: float


@dataclass
class MillerLimitStudy:
    rows: list[MillerLimitRow]
    W: float
    gamma_target: float
    sigma_target: float
    c_gamma: float
    gamma_slope: float

    def bound(self, row: MillerLimitRow) -> float:
        return (self.W / 2 + self.c_gamma) / row.norm


def _loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = y > 0
    if keep.sum() < 2:
        return float("-inf")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def miller_limit_study(potential: PairPotential, F_minus, target, j_max: int, a=None,
                       lattice: BravaisLattice | None = None, sequence: str = "convergents",
                       j_min: int = 1) -> MillerLimitStudy:
    """Gaps ``|gamma_diamond(F, m_j) - gamma(F, n)|`` and ``|tau(F+_j, F-, m_j) - sigma(F+, F-, n)|``.

    The Miller vectors ``m_j`` come from :func:`miller_sequence` (``sequence =
    "convergents"``) or are ``j * m`` for an integer target (``"magnitude"``).
    ``F+ = F- + a ⊗ n`` and ``F+_j = F- + a ⊗ m_j/|m_j|``; with ``a=None`` the
    interface is trivial and the tau gap is identically zero.  The gamma
    constant ``c_gamma`` is the smallest C with ``gap <= (W/2 + C)/|m_j|`` on
    every row, and ``gamma_slope`` the log-log slope of the gap over the
    second half of the rows.
    """
    lattice = lattice or integer_lattice()
    F = np.asarray(F_minus, dtype=float)
    a = np.zeros(3) if a is None else np.asarray(a, dtype=float)
    tvec = np.asarray(target, dtype=float)
    n = lattice.reciprocal(tvec) if np.allclose(tvec, np.rint(tvec)) else tvec
    n = n / np.linalg.norm(n)
    W = cauchy_born_W(potential, F, lattice)
    g0 = gamma(potential, F, n, lattice)
    trivial = not np.any(a)
    s0 = 0.0 if trivial else sigma(potential, F + np.outer(a, n), F, n, lattice)[0]

    rows = []
    for j in range(j_min, j_max + 1):
        if sequence == "convergents":
            m, _ = miller_sequence(target, j)
            mv = m.as_array()
        elif sequence == "magnitude":
            mv = j * np.rint(tvec).astype(np.int64)
        else:
            raise ValueError(f"unknown sequence {sequence!r}")
        nj = lattice.reciprocal(mv)
        norm = float(np.linalg.norm(nj))
        gap_g = abs(gamma_diamond(potential, F, mv, lattice) - g0)
        if trivial:
            gap_t = 0.0
        else:
            Fp_j = F + np.outer(a, nj / norm)
            gap_t = abs(tau(potential, Fp_j, F, _primitive(mv), lattice)[0] - s0)
        rows.append(MillerLimitRow(j, tuple(int(c) for c in mv), norm, gap_g, gap_t))

    c_gamma = max(0.0, max(r.gamma_gap * r.norm - W / 2 for r in rows))
    tail = rows[len(rows) // 2:] if len(rows) >= 4 else rows
    slope = _loglog_slope([r.norm for r in tail], [r.gamma_gap for r in tail])
    return MillerLimitStudy(rows, W, g0, s0, c_gamma, slope)


def _primitive(mv):
    g = math.gcd(*(int(abs(c)) for c in mv))
    return tuple(int(c) // g for c in mv)


# -- modified domains -----------------------------------------------------------------

@dataclass
class ModifiedDomainRow:
    k: int
    eps: float
    remainder: float
    scaled_remainder: float
    count_difference: int
    plain_remainder: float


def modified_domain_check(domain: ConvexPolytope, ks, lattice: BravaisLattice | None = None
                          ) -> list[ModifiedDomainRow]:
    """Lattice-point remainder of the facet-offset domains ``Omega_k``.

    Facet f is pushed out by half the spacing of the ``eps_k L`` planes
    parallel to it, ``eps_k / (2|m_f|)``; this adds no lattice points, and
    ``|Omega_k| - eps_k^3 |K| #(Omega_k ∩ eps_k L)`` is reported together with
    the count difference and the remainder of the unmodified domain.
    """
    lattice = lattice or integer_lattice()
    millers = domain.miller_normals or domain.face_miller_normals(lattice)
    mnorms = np.array([np.linalg.norm(lattice.reciprocal(m.components)) for m in millers])
    rows = []
    for k in ks:
        eps = 1.0 / k
        try:
            dom_k = offset_facets(domain, eps / (2 * mnorms))
        except GeometryError as exc:
            raise GeometryError(f"k={k}: {exc}") from None
        n0 = len(enumerate_in_region(lattice, eps, domain, CLOSED))
        nk = len(enumerate_in_region(lattice, eps, dom_k, CLOSED))
        cell = eps**3 * lattice.cell_volume
        rem = dom_k.volume - cell * nk
        rows.append(ModifiedDomainRow(k, eps, rem, k * rem, abs(nk - n0), domain.volume - cell * n0))
    return rows
