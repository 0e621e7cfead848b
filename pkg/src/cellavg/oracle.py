"""Brute-force references for the closed forms in :mod:`cellavg.energy`.

Translation averages are computed literally: the lattice ``u + eps L`` is
moved over a midpoint grid of offsets ``u`` in the scaled unit cell and the
count or energy is averaged.  Neighbour pairs come from a k-d tree, not from
the index grid used by :func:`cellavg.energy.discrete_energy`.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .geometry import ConvexPolytope
from .lattice import BravaisLattice, enumerate_ball, integer_lattice
from .material import PairPotential, bilipschitz_lower_bound, segment_lower_bound
from .summation import exact_sum

__all__ = ["offset_grid", "translate_average_count", "translate_average_energy", "dense_path_integral"]

_CHUNK_BYTES = 32 * 2**20


def offset_grid(lattice: BravaisLattice, eps: float, grid_n: int) -> np.ndarray:
    """Cell-interior midpoints ``eps * sum_i (k_i + 1/2)/grid_n e_i``, shape (grid_n^3, 3)."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    t = (np.arange(grid_n) + 0.5) / grid_n
    frac = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    return eps * lattice.to_cartesian(frac)


def _candidates(domain: ConvexPolytope, lattice: BravaisLattice, eps: float) -> np.ndarray:
    """Every point of ``eps L`` whose translate by some offset in one cell can land in the domain."""
    V = lattice.to_lattice(domain.vertices) / eps
    lo = np.floor(V.min(axis=0)).astype(int) - 1
    hi = np.ceil(V.max(axis=0)).astype(int) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return eps * lattice.to_cartesian(coords)


def _inside(domain: ConvexPolytope, pts: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """(G, M) membership of ``pts + shifts[g]`` in the closed domain."""
    N, b = domain.normals, domain.offsets
    tol = 1e-12 * max(1.0, domain.diameter)
    lhs = (pts @ N.T)[None, :, :] + (shifts @ N.T)[:, None, :]
    return np.all(lhs <= b + tol, axis=2)


def _chunks(n_offsets, per_offset):
    size = max(1, _CHUNK_BYTES // max(1, 8 * per_offset))
    return [slice(i, min(i + size, n_offsets)) for i in range(0, n_offsets, size)]


def _classify(domain: ConvexPolytope, pts: np.ndarray, shifts: np.ndarray):
    """Split candidates into always-inside, never-inside and boundary-band points for the given shifts."""
    N, b = domain.normals, domain.offsets
    tol = 1e-12 * max(1.0, domain.diameter)
    base = pts @ N.T - b
    proj = shifts @ N.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    always = np.all(base + hi <= -tol, axis=1)
    never = np.any(base + lo > tol, axis=1)
    return always, ~(always | never)


def translate_average_count(domain: ConvexPolytope, lattice: BravaisLattice | None, eps: float,
                            grid_n: int) -> float:
    """``eps^3 |K|`` times the mean of ``#(domain ∩ (u + eps L))`` over the offset grid.

    Tends to the volume of the domain as ``grid_n`` grows.  Points whose
    membership cannot change inside one cell are counted once; the others
    are tested at every offset.
    """
    lattice = lattice or integer_lattice()
    U = offset_grid(lattice, eps, grid_n)
    P = _candidates(domain, lattice, eps)
    always, band = _classify(domain, P, U)
    B = P[band]
    counts = []
    for sl in _chunks(len(U), len(B) * len(domain.faces)):
        counts.extend(_inside(domain, B, U[sl]).sum(axis=1).tolist())
    mean = int(always.sum()) + exact_sum(counts) / len(U)
    return eps**3 * lattice.cell_volume * mean


def translate_average_energy(domain: ConvexPolytope, lattice: BravaisLattice | None, eps: float,
                             deformation, potential: PairPotential, grid_n: int) -> float:
    """Mean of the discrete energy of ``domain ∩ (u + eps L)`` over the offset grid."""
    lattice = lattice or integer_lattice()
    if potential.is_zero:
        return 0.0
    lam = bilipschitz_lower_bound(deformation)
    U = offset_grid(lattice, eps, grid_n)
    P = _candidates(domain, lattice, eps)
    always, band = _classify(domain, P, U)
    P = P[always | band]
    pairs = cKDTree(P).query_pairs(eps * potential.cutoff / lam * (1 + 1e-12), output_type="ndarray")
    if len(pairs) == 0:
        return 0.0
    i, j = pairs[:, 0], pairs[:, 1]
    per_offset = []
    for sl in _chunks(len(U), 3 * len(P) + len(pairs)):
        shifts = U[sl]
        inside = _inside(domain, P, shifts)
        X = P[None, :, :] + shifts[:, None, :]
        Y = deformation.apply(X.reshape(-1, 3)).reshape(X.shape)
        live = inside[:, i] & inside[:, j]
        vals = potential((Y[:, j] - Y[:, i]) / eps)
        per_offset.extend((eps**3 * np.where(live, vals, 0.0).sum(axis=1)).tolist())
    return exact_sum(per_offset) / len(U)


def dense_path_integral(potential: PairPotential, lattice: BravaisLattice | None, F_plus, F_minus,
                        normal, subdivisions: int) -> float:
    """Interaction energy ``(1/2|K|) sum_w |w . n| ∫_0^1 Phi(F_t w) dt`` by the composite trapezoid rule.

    ``F_t = t F+ + (1-t) F-``.  Equals ``-2 ∫_0^1 gamma(F_t, n) dt``.
    """
    lattice = lattice or integer_lattice()
    if subdivisions < 1000:
        raise ValueError("subdivisions must be >= 1000")
    Fp, Fm = np.asarray(F_plus, float), np.asarray(F_minus, float)
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    if potential.is_zero:
        return 0.0
    lam = segment_lower_bound(Fp, Fm)
    coords = enumerate_ball(lattice, potential.cutoff / lam)
    ws = lattice.to_cartesian(coords[np.any(coords != 0, axis=1)])
    t = np.linspace(0.0, 1.0, subdivisions + 1)
    wt = np.full(t.shape, 1.0 / subdivisions)
    wt[[0, -1]] *= 0.5
    terms = []
    for w in ws:
        wn = abs(float(w @ n))
        if wn == 0:
            continue
        pts = np.outer(1 - t, Fm @ w) + np.outer(t, Fp @ w)
        terms.append(wn * float(np.dot(wt, potential(pts))))
    return 0.5 * exact_sum(terms) / lattice.cell_volume
