"""Discrete and cell-averaged lattice energies and their continuum densities.

All lattice sums run over the finite set of lattice vectors that a
deformation with bi-Lipschitz constant ``lam`` can bring inside the cutoff,
``|w| <= R / lam``, and are reduced with a correctly rounded sum so results do
not depend on ordering or thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .geometry import (
    ConvexPolytope,
    GeometryError,
    InterfacePlane,
    cross_section_area,
    face_quadrature,
    gauss_legendre_01,
    polytope_quadrature,
    self_intersection_volume,
    shifted_intersection,
    split_by_plane,
)
from .lattice import (
    CLOSED,
    BravaisLattice,
    MillerVector,
    enumerate_ball,
    enumerate_in_region,
    integer_lattice,
    miller_reduce,
)
from .material import (
    Affine,
    NonInvertibleDeformationError,
    PairPotential,
    PiecewiseAffine,
    SmoothMap,
    bilipschitz_lower_bound,
    cauchy_born_W,
    lattice_vectors_in_range,
    segment_lower_bound,
    smallest_singular_value,
)
from .summation import exact_sum, parallel_exact_sum

__all__ = [
    "IncompatibleInterfaceError",
    "EnergyBreakdown",
    "DensityRow",
    "DensityTable",
    "discrete_energy",
    "cell_avg_energy",
    "gamma",
    "gamma_diamond",
    "sigma",
    "sigma_hat",
    "tau",
    "tau_hat",
    "tau_hat_trapezoid",
    "trapezoid_sum",
    "surface_integral",
    "predict_expansion",
    "cauchy_born_W",
]

SIGMA_GAUSS_ORDER = 32
SLAB_GAUSS_ORDER = 16
SMOOTH_QUAD_ORDER = 8
COMPAT_TOL = 1e-10


class IncompatibleInterfaceError(ValueError):
    pass


def _lattice(lattice):
    return lattice if lattice is not None else integer_lattice()


def _as_miller(m) -> MillerVector:
    return m if isinstance(m, MillerVector) else miller_reduce(m)


# -- discrete energy ------------------------------------------------------------------

def discrete_energy(domain: ConvexPolytope, lattice: BravaisLattice | None, eps: float,
                    deformation, potential: PairPotential, rule: str = CLOSED,
                    threads: int = 1, return_count: bool = False):
    """``(eps^3 / 2) sum_{x,z in domain ∩ eps L} Phi((y(z) - y(x)) / eps)``.

    Neighbours are found on the integer index grid of the point set: a pair
    (x, x + eps w) can only interact if ``|w| <= R / lam``.
    """
    lattice = _lattice(lattice)
    if eps <= 0:
        raise ValueError("eps must be positive")
    lam = bilipschitz_lower_bound(deformation)
    pts = enumerate_in_region(lattice, eps, domain, rule)
    n = len(pts)
    if n < 2 or potential.is_zero:
        return (0.0, n) if return_count else 0.0
    Y = deformation.apply(pts.points)
    C = pts.coords
    cmin = C.min(axis=0)
    shape = C.max(axis=0) - cmin + 1
    index = np.full(tuple(shape), -1, dtype=np.int64)
    index[tuple((C - cmin).T)] = np.arange(n)

    ws = enumerate_ball(lattice, potential.cutoff / lam)
    # one representative of each +-w pair; every unordered bond is visited once
    ws = ws[[tuple(w) > (0, 0, 0) for w in ws]]

    def bond_terms(w):
        T = C - cmin + w
        valid = np.all((T >= 0) & (T < shape), axis=1)
        j = index[tuple(T[valid].T)]
        i = np.nonzero(valid)[0][j >= 0]
        j = j[j >= 0]
        return potential((Y[j] - Y[i]) / eps)

    total = parallel_exact_sum(bond_terms, list(ws), threads)
    energy = eps**3 * total
    return (energy, n) if return_count else energy


# -- cell-averaged energy ---------------------------------------------------------------

def cell_avg_energy(domain: ConvexPolytope, lattice: BravaisLattice | None, eps: float,
                    deformation, potential: PairPotential, quad_order: int | None = None,
                    threads: int = 1) -> float:
    """Average of the discrete energy over all translations of the lattice.

    ``(1 / 2|K|) sum_w ∫_domain chi(x + eps w) Phi((y(x + eps w) - y(x)) / eps) dx``,
    evaluated exactly for affine maps, with exact volumes plus a 1-D slab
    integral for piecewise-affine maps, and by tetrahedral Gauss quadrature
    for smooth maps.
    """
    lattice = _lattice(lattice)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if potential.is_zero or domain.is_empty:
        return 0.0
    if isinstance(deformation, Affine):
        total = _cell_avg_affine(domain, eps, deformation.F, potential, lattice, threads)
    elif isinstance(deformation, PiecewiseAffine):
        total = _cell_avg_piecewise(domain, eps, deformation, potential, lattice,
                                    quad_order or SLAB_GAUSS_ORDER, threads)
    elif isinstance(deformation, SmoothMap):
        total = _cell_avg_smooth(domain, eps, deformation, potential, lattice,
                                 quad_order or SMOOTH_QUAD_ORDER, threads)
    else:
        raise TypeError(f"unsupported deformation {type(deformation).__name__}")
    return 0.5 * total / lattice.cell_volume


def _half_space_vectors(ws: np.ndarray) -> np.ndarray:
    return ws[[tuple(w) > (0.0, 0.0, 0.0) for w in np.round(ws, 12)]]


def _cell_avg_affine(domain, eps, F, potential, lattice, threads):
    lam = smallest_singular_value(F)
    ws = _half_space_vectors(lattice_vectors_in_range(potential, lattice, lam))
    phi = potential(ws @ F.T)
    ws, phi = ws[phi != 0], phi[phi != 0]

    def term(k):
        # factor 2: the -w partner has the same overlap volume and the same Phi
        return 2.0 * self_intersection_volume(domain, eps * ws[k]) * phi[k]

    return parallel_exact_sum(term, list(range(len(ws))), threads)


def _cutoff_crossings(p, q, R, lo, hi):
    """Parameters u in (lo, hi) where |p + u q| = R."""
    A = q @ q
    B = 2 * p @ q
    C = p @ p - R * R
    if A == 0:
        return []
    disc = B * B - 4 * A * C
    if disc <= 0:
        return []
    sq = math.sqrt(disc)
    roots = [(-B - sq) / (2 * A), (-B + sq) / (2 * A)]
    return [r for r in roots if lo < r < hi]


def _slab_integral(Q, n, s_lo, s_hi, base, slope, potential, order):
    """∫ area(Q ∩ {x.n = s}) Phi(base + s * slope) ds over [s_lo, s_hi].

    The section area is quadratic between vertex heights and Phi is smooth
    between cutoff crossings, so a Gauss rule per piece is exact up to the
    smoothness of the potential profile.
    """
    h = Q.vertices @ n
    s_lo, s_hi = max(s_lo, h.min()), min(s_hi, h.max())
    if s_hi <= s_lo:
        return 0.0
    brk = {s_lo, s_hi}
    brk.update(x for x in h if s_lo < x < s_hi)
    brk.update(_cutoff_crossings(base, slope, potential.cutoff, s_lo, s_hi))
    brk = sorted(brk)
    x01, w01 = gauss_legendre_01(order)
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            continue
        samples = [cross_section_area(Q, n, s) for s in (a, 0.5 * (a + b), b)]
        t = x01
        # quadratic Lagrange interpolation of the section area in t in [0, 1]
        area = (samples[0] * (1 - t) * (1 - 2 * t) + samples[1] * 4 * t * (1 - t)
                + samples[2] * t * (2 * t - 1))
        s = a + (b - a) * t
        vals = potential(base[None, :] + s[:, None] * slope[None, :])
        total += (b - a) * float(np.dot(w01, area * vals))
    return total


def _cell_avg_piecewise(domain, eps, d: PiecewiseAffine, potential, lattice, order, threads):
    n = d.normal
    Fp, Fm, a = d.F_plus, d.F_minus, d.a
    try:
        plus, minus, _, _ = split_by_plane(domain, d.plane)
    except GeometryError:
        side_plus = float(np.mean(domain.vertices @ n)) > 0
        return _cell_avg_affine(domain, eps, Fp if side_plus else Fm, potential, lattice, threads)
    lam = bilipschitz_lower_bound(d)
    ws = lattice_vectors_in_range(potential, lattice, lam)

    def term(k):
        w = ws[k]
        out = []
        phi_m, phi_p = potential(Fm @ w), potential(Fp @ w)
        if phi_m != 0:
            out.append(self_intersection_volume(minus, eps * w) * phi_m)
        if phi_p != 0:
            out.append(self_intersection_volume(plus, eps * w) * phi_p)
        wn = float(w @ n)
        if abs(wn) > 1e-14:
            Q = shifted_intersection(domain, eps * w)
            if not Q.is_empty:
                if wn > 0:
                    # x below the plane, x + eps w above: argument F+ w + (s/eps) a
                    out.append(_slab_integral(Q, n, -eps * wn, 0.0, Fp @ w, a / eps,
                                              potential, order))
                else:
                    out.append(_slab_integral(Q, n, 0.0, -eps * wn, Fm @ w, -a / eps,
                                              potential, order))
        return np.array(out)

    return parallel_exact_sum(term, list(range(len(ws))), threads)


def _cell_avg_smooth(domain, eps, d: SmoothMap, potential, lattice, order, threads):
    lam = bilipschitz_lower_bound(d)
    ws = lattice_vectors_in_range(potential, lattice, lam)

    def term(k):
        w = eps * ws[k]
        Q = shifted_intersection(domain, w)
        if Q.is_empty:
            return np.zeros(0)
        pts, wts = polytope_quadrature(Q, order)
        vals = potential((d.apply(pts + w) - d.apply(pts)) / eps)
        return wts * vals

    return parallel_exact_sum(term, list(range(len(ws))), threads)


# -- densities -----------------------------------------------------------------------

def _unit(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return n / np.linalg.norm(n)


def gamma(potential: PairPotential, F, normal, lattice: BravaisLattice | None = None) -> float:
    """Surface energy density ``-(1 / 4|K|) sum_w |w . n| Phi(F w)`` for a unit normal n."""
    lattice = _lattice(lattice)
    F = np.asarray(F, dtype=float)
    n = _unit(normal)
    ws = lattice_vectors_in_range(potential, lattice, smallest_singular_value(F))
    return -0.25 * exact_sum(np.abs(ws @ n) * potential(ws @ F.T)) / lattice.cell_volume


def _integer_vector(m) -> np.ndarray:
    if isinstance(m, MillerVector):
        return m.as_array()
    v = np.asarray(m, dtype=float)
    vi = np.rint(v).astype(np.int64)
    if v.shape != (3,) or np.abs(v - vi).max() > 1e-9 or not np.any(vi):
        raise ValueError(f"{m!r} is not a nonzero integer 3-vector")
    return vi


def gamma_diamond(potential: PairPotential, F, miller, lattice: BravaisLattice | None = None) -> float:
    """Lattice-polyhedron surface density ``-(1/4) sum_w (|w . m| - 1) Phi(F w) / |m|``.

    `miller` is an integer vector (primitive for a facet normal, any multiple
    for magnitude studies); ``w . m`` is the integer ``coords(w) . m`` and
    ``|m|`` the length of the reciprocal vector.
    """
    lattice = _lattice(lattice)
    m = _integer_vector(miller)
    F = np.asarray(F, dtype=float)
    coords = enumerate_ball(lattice, potential.cutoff / smallest_singular_value(F))
    coords = coords[np.any(coords != 0, axis=1)]
    ws = lattice.to_cartesian(coords)
    mnorm = float(np.linalg.norm(lattice.reciprocal(m)))
    weights = (np.abs(coords @ m) - 1) / mnorm
    return -0.25 * exact_sum(weights * potential(ws @ F.T)) / lattice.cell_volume


def _jump(F_plus, F_minus, normal):
    """Vector a with ``F+ - F- = a ⊗ n``; raises if the pair is not rank-one compatible."""
    Fp, Fm = np.asarray(F_plus, float), np.asarray(F_minus, float)
    n = _unit(normal)
    D = Fp - Fm
    a = D @ n
    if np.abs(D - np.outer(a, n)).max() > COMPAT_TOL * max(1.0, np.abs(D).max()):
        raise IncompatibleInterfaceError("F+ - F- is not of the form a ⊗ n (Hadamard condition)")
    return Fp, Fm, n, a


def _segment_lambda(Fp, Fm):
    lam = segment_lower_bound(Fp, Fm)
    if lam <= 1e-10:
        raise NonInvertibleDeformationError("a convex combination of F+ and F- is singular")
    return lam


def sigma_hat(potential: PairPotential, F_plus, F_minus, normal,
              lattice: BravaisLattice | None = None, order: int = SIGMA_GAUSS_ORDER) -> float:
    """Interaction energy ``-2 ∫_0^1 gamma(t F+ + (1-t) F-, n) dt``.

    Per lattice vector the t-integral is split where ``|F_t w|`` crosses the
    cutoff and each piece gets an `order`-point Gauss-Legendre rule.
    """
    lattice = _lattice(lattice)
    Fp, Fm, n, a = _jump(F_plus, F_minus, normal)
    ws = lattice_vectors_in_range(potential, lattice, _segment_lambda(Fp, Fm))
    x01, w01 = gauss_legendre_01(order)
    terms = []
    for w in ws:
        wn = abs(float(w @ n))
        if wn < 1e-14:
            continue
        p = Fm @ w
        q = (w @ n) * a
        brk = [0.0, *sorted(_cutoff_crossings(p, q, potential.cutoff, 0.0, 1.0)), 1.0]
        for lo, hi in zip(brk[:-1], brk[1:]):
            t = lo + (hi - lo) * x01
            vals = potential(p[None, :] + t[:, None] * q[None, :])
            terms.append(wn * (hi - lo) * float(np.dot(w01, vals)))
    return 0.5 * exact_sum(terms) / lattice.cell_volume


def sigma(potential: PairPotential, F_plus, F_minus, normal,
          lattice: BravaisLattice | None = None, order: int = SIGMA_GAUSS_ORDER):
    """Cell-averaged interfacial energy density; returns ``(sigma, sigma_hat)``."""
    sh = sigma_hat(potential, F_plus, F_minus, normal, lattice, order)
    s = gamma(potential, F_plus, normal, lattice) + gamma(potential, F_minus, normal, lattice) + sh
    return s, sh


def _tau_setup(potential, F_plus, F_minus, miller, lattice):
    m = _as_miller(miller)
    normal = lattice.reciprocal(m.components)
    mnorm = float(np.linalg.norm(normal))
    Fp, Fm, n, a = _jump(F_plus, F_minus, normal)
    coords = enumerate_ball(lattice, potential.cutoff / _segment_lambda(Fp, Fm))
    K = np.abs(coords @ m.as_array())
    keep = K > 0
    return Fp, Fm, n, mnorm, lattice.to_cartesian(coords[keep]), K[keep]


def tau_hat(potential: PairPotential, F_plus, F_minus, miller,
            lattice: BravaisLattice | None = None) -> float:
    """Discrete interaction energy on a crystallographic interface with Miller normal `miller`.

    ``(1 / 2|m|) sum_{w . m != 0} [Phi(F- w)/2 + Phi(F+ w)/2
    + sum_{j=1}^{K-1} Phi(F- w + (j/K)(F+ - F-) w)]`` with ``K = |w . m|``.
    Bonds lying in the interface plane (``K = 0``) carry no interaction term.
    """
    lattice = _lattice(lattice)
    Fp, Fm, _, mnorm, ws, K = _tau_setup(potential, F_plus, F_minus, miller, lattice)
    if len(ws) == 0:
        return 0.0
    idx = np.repeat(np.arange(len(ws)), K + 1)
    j = np.concatenate([np.arange(k + 1) for k in K])
    t = j / K[idx]
    pts = ws[idx] @ Fm.T + t[:, None] * (ws[idx] @ (Fp - Fm).T)
    vals = potential(pts)
    weights = np.where((j == 0) | (j == K[idx]), 0.5, 1.0)
    return exact_sum(weights * vals) / (2.0 * mnorm) / lattice.cell_volume


def tau(potential: PairPotential, F_plus, F_minus, miller,
        lattice: BravaisLattice | None = None):
    """Discrete interfacial energy density; returns ``(tau, tau_hat)``."""
    lattice = _lattice(lattice)
    m = _as_miller(miller)
    n = _unit(lattice.reciprocal(m.components))
    th = tau_hat(potential, F_plus, F_minus, m, lattice)
    t = gamma(potential, F_plus, n, lattice) + gamma(potential, F_minus, n, lattice) + th
    return t, th


def trapezoid_sum(f: Callable, a, b, K: int) -> float:
    """``(|b - a| / K) sum_{j<K} (f(x_j) + f(x_{j+1})) / 2`` with ``x_j = a + (j/K)(b - a)``.

    `a` and `b` may be scalars, vectors or matrices; ``|.|`` is the Euclidean
    (Frobenius) norm.
    """
    if K < 1:
        raise ValueError("partition number K must be >= 1")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    vals = [float(f(a + (j / K) * (b - a))) for j in range(K + 1)]
    inner = 0.5 * vals[0] + 0.5 * vals[-1] + math.fsum(vals[1:-1])
    return float(np.linalg.norm((b - a).ravel())) / K * inner


def tau_hat_trapezoid(potential: PairPotential, F_plus, F_minus, miller,
                      lattice: BravaisLattice | None = None) -> float:
    """``tau_hat`` through trapezoidal sums of ``F -> Phi(F w)`` along ``[F-, F+]``.

    Needs ``F+ != F-`` because of the ``1/|F+ - F-|`` normalisation.
    """
    lattice = _lattice(lattice)
    Fp, Fm, _, mnorm, ws, K = _tau_setup(potential, F_plus, F_minus, miller, lattice)
    dnorm = float(np.linalg.norm(Fp - Fm))
    if dnorm == 0:
        raise ValueError("trapezoid form is undefined for F+ == F-")
    terms = [k * trapezoid_sum(lambda G, w=w: potential(G @ w), Fm, Fp, int(k))
             for w, k in zip(ws, K)]
    return exact_sum(terms) / (2.0 * mnorm * dnorm) / lattice.cell_volume


# -- surface integrals and predictions ------------------------------------------------

def surface_integral(domain: ConvexPolytope, density: Callable, order: int | None = None,
                     faces=None) -> float:
    """Sum over faces of ``∫_face density dA``.

    With ``order=None`` the density is constant per face and called as
    ``density(normal)``; otherwise it is called as ``density(points, normal)``
    on an `order`-point collapsed Gauss rule per triangle.
    """
    faces = domain.faces if faces is None else faces
    terms = []
    for f in faces:
        if order is None:
            terms.append(f.area * float(density(f.normal)))
        else:
            pts, wts = face_quadrature(f, order)
            terms.append(float(np.dot(wts, density(pts, f.normal))))
    return exact_sum(terms)


@dataclass
class EnergyBreakdown:
    """Energy value next to the bulk / surface / interface coefficients predicted for it."""

    total: float
    bulk_prediction: float
    surface_prediction: float
    interface_prediction: float = 0.0
    epsilon: float = float("nan")
    atom_count: int = 0

    @property
    def prediction(self) -> float:
        return self.bulk_prediction + self.epsilon * (self.surface_prediction + self.interface_prediction)

    @property
    def residual(self) -> float:
        return self.total - self.prediction

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prediction"] = self.prediction
        d["residual"] = self.residual
        return d

    CSV_COLUMNS = ("label", "eps", "value", "bulk", "surface", "interface", "residual")

    def csv_row(self, label: str) -> list:
        return [label, repr(self.epsilon), repr(self.total), repr(self.bulk_prediction),
                repr(self.surface_prediction), repr(self.interface_prediction), repr(self.residual)]


@dataclass
class DensityRow:
    label: str
    F: tuple
    normal: tuple
    value: float


@dataclass
class DensityTable:
    rows: list[DensityRow] = field(default_factory=list)

    CSV_COLUMNS = ("label", "F", "normal", "value")

    def add(self, label, F, normal, value):
        if label.startswith(("sigma", "gamma")) and normal is None:
            raise ValueError(f"{label} row needs a normal")
        mats = F if isinstance(F, tuple) else (F,)
        self.rows.append(DensityRow(
            label,
            tuple(np.asarray(m, float).round(15).tolist() for m in mats),
            tuple(np.asarray(normal).tolist()) if normal is not None else (),
            float(value),
        ))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            F = ";".join(" ".join(repr(float(x)) for x in np.ravel(m)) for m in r.F)
            normal = " ".join(repr(x) for x in r.normal)
            wr.writerow([r.label, F, normal, repr(r.value)])
        return buf.getvalue()

    def to_json(self) -> list[dict]:
        return [asdict(r) for r in self.rows]

    def value(self, label) -> float:
        return next(r.value for r in self.rows if r.label == label)


def _interface_parts(domain, deformation: PiecewiseAffine):
    plus, minus, area, _ = split_by_plane(domain, deformation.plane)
    n = deformation.normal
    tol = 1e-9

    def outer(poly, sign):
        # drop the interface cap: outward normal sign * n lying on the plane
        return [f for f in poly.faces
                if not (f.normal @ (sign * n) > 1 - 1e-12 and abs(f.offset) <= tol * max(1, poly.diameter))]

    return plus, minus, area, outer(plus, -1), outer(minus, +1)


def _miller_for_faces(domain: ConvexPolytope, faces, lattice):
    millers = domain.miller_normals or domain.face_miller_normals(lattice)
    out = []
    for f in faces:
        k = int(np.argmax(domain.normals @ f.normal))
        if domain.normals[k] @ f.normal < 1 - 1e-9:
            raise GeometryError("face normal does not match any facet of the domain")
        out.append(millers[k])
    return out


def _smooth_bulk_surface(domain, deformation: SmoothMap, potential, lattice, order):
    lam = bilipschitz_lower_bound(deformation)
    ws = lattice_vectors_in_range(potential, lattice, lam)
    kvol = lattice.cell_volume

    def W_at(pts):
        G = deformation.gradient(pts)  # (N, 3, 3)
        vals = potential(np.einsum("nij,wj->nwi", G, ws))
        return 0.5 * vals.sum(axis=1) / kvol

    def gamma_at(pts, normal):
        G = deformation.gradient(pts)
        vals = potential(np.einsum("nij,wj->nwi", G, ws))
        return -0.25 * (vals * np.abs(ws @ normal)[None, :]).sum(axis=1) / kvol

    pts, wts = polytope_quadrature(domain, order)
    bulk = float(np.dot(wts, W_at(pts)))
    surface = surface_integral(domain, gamma_at, order=order)
    return bulk, surface


def predict_expansion(kind: str, domain: ConvexPolytope, potential: PairPotential, deformation,
                      lattice: BravaisLattice | None = None, epsilon: float = float("nan"),
                      total: float = float("nan"), atom_count: int = 0,
                      quad_order: int = SMOOTH_QUAD_ORDER) -> EnergyBreakdown:
    """Bulk, surface and interface coefficients of the small-eps expansion.

    kinds: ``cell_avg_affine``, ``cell_avg_smooth``, ``cell_avg_interface``
    (gamma on the boundary, sigma on the interface), ``discrete_polyhedron``
    and ``discrete_interface`` (gamma_diamond on Miller facets, tau on the
    interface; the domain must be a lattice polyhedron).
    """
    lattice = _lattice(lattice)

    def result(bulk, surface, interface=0.0):
        return EnergyBreakdown(total, bulk, surface, interface, epsilon, atom_count)

    if kind in ("cell_avg_affine", "discrete_polyhedron"):
        if not isinstance(deformation, Affine):
            raise TypeError(f"{kind} needs an affine deformation")
        F = deformation.F
        bulk = domain.volume * cauchy_born_W(potential, F, lattice)
        if kind == "cell_avg_affine":
            surface = surface_integral(domain, lambda n: gamma(potential, F, n, lattice))
        else:
            millers = _miller_for_faces(domain, domain.faces, lattice)
            surface = exact_sum([f.area * gamma_diamond(potential, F, m, lattice)
                                 for f, m in zip(domain.faces, millers)])
        return result(bulk, surface)

    if kind == "cell_avg_smooth":
        if isinstance(deformation, Affine):
            return predict_expansion("cell_avg_affine", domain, potential, deformation, lattice,
                                     epsilon, total, atom_count)
        return result(*_smooth_bulk_surface(domain, deformation, potential, lattice, quad_order))

    if kind in ("cell_avg_interface", "discrete_interface"):
        if not isinstance(deformation, PiecewiseAffine):
            raise TypeError(f"{kind} needs a piecewise-affine deformation")
        Fp, Fm = deformation.F_plus, deformation.F_minus
        plus, minus, area, faces_p, faces_m = _interface_parts(domain, deformation)
        bulk = (plus.volume * cauchy_born_W(potential, Fp, lattice)
                + minus.volume * cauchy_born_W(potential, Fm, lattice))
        if kind == "cell_avg_interface":
            surface = (surface_integral(plus, lambda n: gamma(potential, Fp, n, lattice), faces=faces_p)
                       + surface_integral(minus, lambda n: gamma(potential, Fm, n, lattice), faces=faces_m))
            interface = area * sigma(potential, Fp, Fm, deformation.normal, lattice)[0]
        else:
            miller = deformation.plane.miller
            if miller is None:
                raise ValueError("discrete interface prediction needs a Miller interface normal")
            terms = []
            for faces, F in ((faces_p, Fp), (faces_m, Fm)):
                for f, m in zip(faces, _miller_for_faces(domain, faces, lattice)):
                    terms.append(f.area * gamma_diamond(potential, F, m, lattice))
            surface = exact_sum(terms)
            interface = area * tau(potential, Fp, Fm, miller, lattice)[0]
        return result(bulk, surface, interface)

    raise ValueError(f"unknown expansion kind {kind!r}")


def breakdown_json(b: EnergyBreakdown) -> str:
    return json.dumps(b.to_dict(), sort_keys=True)
