"""Bravais lattices, Miller vectors and lattice-point enumeration.

Everything here is exact where it can be (integer coordinates, gcd, unimodular
completion) and floating point only where a region membership test or a length
is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .geometry import ConvexPolytope

__all__ = [
    "InvalidLatticeError",
    "BravaisLattice",
    "MillerVector",
    "LatticePointSet",
    "integer_lattice",
    "dual_basis",
    "enumerate_ball",
    "enumerate_in_region",
    "lattice_remainder",
    "miller_reduce",
    "miller_sequence",
    "miller_geometry",
    "continued_fraction_convergents",
    "unimodular_completion",
]

CLOSED = "closed"
HALF_OPEN = "halfopen"
BOUNDARY_RULES = (CLOSED, HALF_OPEN)


class InvalidLatticeError(ValueError):
    pass


def dual_basis(basis) -> np.ndarray:
    """Rows ``b_i`` with ``b_i . e_k = delta_ik`` for the rows ``e_k`` of `basis`."""
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (3, 3):
        raise InvalidLatticeError(f"basis must be 3x3, got shape {basis.shape}")
    scale = np.abs(basis).max()
    if scale == 0 or abs(np.linalg.det(basis / scale)) < 1e-12:
        raise InvalidLatticeError("lattice basis is singular")
    return np.linalg.inv(basis).T


@dataclass(frozen=True, eq=False)
class BravaisLattice:
    """Simple lattice ``L = {c @ basis : c in Z^3}``; rows of `basis` are e_1, e_2, e_3."""

    basis: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "dual", dual_basis(basis))
        basis.setflags(write=False)
        self.dual.setflags(write=False)

    @property
    def dual_basis(self) -> np.ndarray:
        return self.dual

    @property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    def to_cartesian(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self.basis

    def to_lattice(self, points) -> np.ndarray:
        """Fractional lattice coordinates of Cartesian points."""
        return np.asarray(points, dtype=float) @ self.dual.T

    def reciprocal(self, miller) -> np.ndarray:
        """Cartesian normal ``sum_i h_i b_i`` of the lattice planes with Miller indices `miller`."""
        return np.asarray(miller, dtype=float) @ self.dual

    def __eq__(self, other):
        return isinstance(other, BravaisLattice) and np.array_equal(self.basis, other.basis)

    def __hash__(self):
        return hash(self.basis.tobytes())

    def __repr__(self):
        return f"BravaisLattice(basis={self.basis.tolist()})"


def integer_lattice() -> BravaisLattice:
    return BravaisLattice(np.eye(3))


@dataclass(frozen=True)
class MillerVector:
    """Coprime integer triple (h, k, l) labelling a family of crystallographic planes."""

    components: tuple[int, int, int]

    def __post_init__(self):
        comps = tuple(int(c) for c in self.components)
        if len(comps) != 3:
            raise ValueError("Miller vector needs three components")
        if comps == (0, 0, 0):
            raise ValueError("Miller vector cannot be zero")
        if math.gcd(*comps) != 1:
            raise ValueError(f"components {comps} are not coprime; use miller_reduce")
        object.__setattr__(self, "components", comps)

    def __iter__(self):
        return iter(self.components)

    def __neg__(self):
        return MillerVector(tuple(-c for c in self.components))

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=np.int64)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.components))

    @property
    def unit(self) -> np.ndarray:
        return self.as_array() / self.norm

    @property
    def spacing(self) -> float:
        return 1.0 / self.norm

    @property
    def planar_cell_area(self) -> float:
        return self.norm

    def bezout(self) -> tuple[int, int, int]:
        """Integer p with ``p . self = 1`` (extended Euclid)."""
        h, k, l = self.components
        g1, x1, y1 = _ext_gcd(h, k)
        _, x2, y2 = _ext_gcd(g1, l)
        return (x1 * x2, y1 * x2, y2)


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b) >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def miller_reduce(v) -> MillerVector:
    comps = [int(round(c)) for c in v]
    if any(abs(c - float(o)) > 1e-9 for c, o in zip(comps, v)):
        raise ValueError(f"{v!r} is not an integer vector")
    g = reduce(math.gcd, (abs(c) for c in comps))
    if g == 0:
        raise ValueError("cannot reduce the zero vector")
    return MillerVector(tuple(c // g for c in comps))


def miller_geometry(m: MillerVector) -> tuple[float, float]:
    """(interplanar spacing, planar unit-cell area) for the integer lattice."""
    return m.spacing, m.planar_cell_area


def unimodular_completion(m) -> np.ndarray:
    """Unimodular integer matrix D with ``D @ m = e_3`` for a coprime integer vector m.

    Rows d_1, d_2 span the sublattice orthogonal to m and d_3 . m = 1.  Built by
    integer row reduction of the column m (a Hermite-form reduction of the 1x3
    matrix m^T); for m = e_3 it returns the identity.
    """
    v = [int(c) for c in m]
    if math.gcd(*v) != 1:
        raise ValueError(f"{m!r} is not a primitive (coprime) vector")
    U = [[int(i == j) for j in range(3)] for i in range(3)]

    def addrow(dst, src, q):
        U[dst] = [a - q * b for a, b in zip(U[dst], U[src])]
        v[dst] -= q * v[src]

    while sum(1 for c in v if c != 0) > 1:
        piv = min((i for i in range(3) if v[i] != 0), key=lambda i: abs(v[i]))
        for i in range(3):
            if i != piv and v[i] != 0:
                addrow(i, piv, v[i] // v[piv])
    piv = next(i for i in range(3) if v[i] != 0)
    if piv != 2:
        U[piv], U[2] = U[2], U[piv]
        v[piv], v[2] = v[2], v[piv]
    if v[2] < 0:
        U[2] = [-a for a in U[2]]
        v[2] = -v[2]
    D = np.array(U, dtype=np.int64)
    assert v == [0, 0, 1] and round(abs(np.linalg.det(D))) == 1
    return D


def continued_fraction_convergents(x: float | Fraction, n_terms: int) -> list[Fraction]:
    """First `n_terms` convergents of the continued fraction of x (fewer if it terminates)."""
    x = Fraction(x)
    out = []
    h_prev, h = 1, math.floor(x)
    k_prev, k = 0, 1
    out.append(Fraction(h, k))
    rem = x - math.floor(x)
    while len(out) < n_terms and rem != 0:
        x = 1 / rem
        a = math.floor(x)
        rem = x - a
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        out.append(Fraction(h, k))
    return out


def _rational_direction(n: np.ndarray, max_index: int = 1000, tol: float = 1e-12):
    """Miller vector m with m/|m| == n (to `tol`), or None if no small-index match exists."""
    i = int(np.argmax(np.abs(n)))
    ratios = [Fraction(float(c / n[i])).limit_denominator(max_index) for c in n]
    denom = reduce(math.lcm, (r.denominator for r in ratios))
    cand = miller_reduce([int(r * denom) for r in ratios])
    if n[i] < 0:
        cand = -cand
    return cand if np.allclose(cand.unit, n, atol=tol, rtol=0) else None


def miller_sequence(target, j: int) -> tuple[MillerVector, tuple[int, int, int]]:
    """j-th Miller normal n_j of a sequence with n_j/|n_j| -> target and |n_j| -> inf.

    Returns ``(n_j, p_j)`` where the integer certificate ``p_j`` satisfies
    ``n_j . p_j = 1``, so the components of ``n_j`` are coprime.

    A rational target (a MillerVector, an integer triple, or a unit vector that
    is a small-index rational direction) uses the unimodular completion
    ``D m = e_3``; with b_i the dual basis of the rows d_i,
    ``n_j = b_1 + b_2 + j b_3`` and ``p_j = -j d_1 + d_2 + d_3``.
    An irrational unit target uses the j-th continued-fraction convergent of
    every component, cleared by the lcm of the denominators.
    """
    if j < 1:
        raise ValueError("j must be a positive integer")
    if isinstance(target, MillerVector):
        m = target
    else:
        arr = np.asarray(target)
        if np.issubdtype(arr.dtype, np.integer):
            m = miller_reduce(arr)
        else:
            arr = arr.astype(float)
            if arr.shape != (3,) or abs(np.linalg.norm(arr) - 1.0) > 1e-9:
                if arr.shape == (3,) and np.allclose(arr, np.round(arr)) and np.any(arr):
                    m = miller_reduce(arr)
                else:
                    raise ValueError("target must be a unit 3-vector or a Miller vector")
            else:
                m = _rational_direction(arr)
                if m is None:
                    return _irrational_sequence(arr, j)
    D = unimodular_completion(m.components)
    B = np.rint(np.linalg.inv(D).T).astype(np.int64)  # rows b_i, b_i . d_k = delta_ik
    n = B[0] + B[1] + j * B[2]
    p = -j * D[0] + D[1] + D[2]
    assert int(n @ p) == 1
    return MillerVector(tuple(int(c) for c in n)), tuple(int(c) for c in p)


def _irrational_sequence(n: np.ndarray, j: int) -> tuple[MillerVector, tuple[int, int, int]]:
    # convergent index offset so that j = 1 already resolves every component's sign
    approx = [continued_fraction_convergents(abs(float(c)), j + 1)[-1] for c in n]
    denom = reduce(math.lcm, (a.denominator for a in approx))
    ints = [int(math.copysign(1, c)) * int(a * denom) for a, c in zip(approx, n)]
    m = miller_reduce(ints)
    return m, m.bezout()


@dataclass(frozen=True, eq=False)
class LatticePointSet:
    """Points of ``region ∩ scale*L`` in lexicographic lattice-coordinate order."""

    scale: float
    coords: np.ndarray  # (N, 3) integer lattice coordinates
    points: np.ndarray  # (N, 3) Cartesian positions
    boundary_rule: str

    def __len__(self):
        return len(self.coords)


MAX_BALL_CANDIDATES = 20_000_000


def enumerate_ball(lattice: BravaisLattice, radius: float) -> np.ndarray:
    """Integer coordinates of every w in L with |w| <= radius, lexicographically sorted.

    Returns an (N, 3) int array; Cartesian vectors are ``lattice.to_cartesian(out)``.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    bounds = [int(math.floor(radius * np.linalg.norm(b) + 1e-9)) for b in lattice.dual]
    if math.prod(2 * n + 1 for n in bounds) > MAX_BALL_CANDIDATES:
        raise ValueError(f"interaction ball of radius {radius:.3g} is too large to enumerate "
                         "(nearly singular deformation?)")
    axes = [np.arange(-n, n + 1) for n in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    vecs = grid @ lattice.basis
    keep = np.einsum("ij,ij->i", vecs, vecs) <= radius * radius * (1 + 1e-12)
    return grid[keep]


def enumerate_in_region(
    lattice: BravaisLattice,
    scale: float,
    region: "ConvexPolytope",
    rule: str = CLOSED,
) -> LatticePointSet:
    """All points of ``scale * L`` inside `region` under the boundary `rule`."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if rule not in BOUNDARY_RULES:
        raise ValueError(f"unknown boundary rule {rule!r}")
    if region.is_empty:
        return LatticePointSet(scale, np.zeros((0, 3), np.int64), np.zeros((0, 3)), rule)
    frac = lattice.to_lattice(region.vertices) / scale
    lo = np.floor(frac.min(axis=0) - 1e-9).astype(np.int64)
    hi = np.ceil(frac.max(axis=0) + 1e-9).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = scale * (grid @ lattice.basis)
    inside = region.contains(pts, rule)
    return LatticePointSet(scale, grid[inside], pts[inside], rule)


def lattice_remainder(region: "ConvexPolytope", lattice: BravaisLattice, scale: float,
                      rule: str = CLOSED) -> float:
    """Continuous minus discrete volume, ``|region| - scale^3 |K| #(region ∩ scale L)``."""
    count = len(enumerate_in_region(lattice, scale, region, rule))
    # rational arithmetic keeps commensurate cases (scale = 1/k, unit cell volume) exactly zero
    s = Fraction(scale)
    near = s.limit_denominator(10**6)
    if abs(float(near) - scale) <= 4e-16 * scale:
        s = near
    rem = Fraction(region.volume) - s**3 * Fraction(lattice.cell_volume) * count
    return float(rem)
