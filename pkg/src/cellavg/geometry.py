"""Convex polytopes with exact clipping, volumes, sections and facet offsets.

A polytope is stored as a list of planar faces.  Each face keeps its outward
unit normal, its offset (``x . normal = offset`` on the face) and an ordered
vertex ring, counter-clockwise when seen from outside.  Clipping by a
half-space is Sutherland-Hodgman on every ring plus one new cap face, so the
volume of any intersection of half-spaces is exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .lattice import CLOSED, HALF_OPEN, BravaisLattice, MillerVector, miller_reduce

__all__ = [
    "GeometryError",
    "HalfSpace",
    "Face",
    "InterfacePlane",
    "ConvexPolytope",
    "box",
    "hull",
    "from_halfspaces",
    "clip",
    "measure",
    "self_intersection_volume",
    "split_by_plane",
    "cross_section_area",
    "cross_section_breakpoints",
    "offset_facets",
    "polytope_from_dict",
    "gauss_legendre_01",
    "tetrahedron_rule",
    "triangle_rule",
]

REL_TOL = 1e-10
MEMBERSHIP_TOL = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{x : x . normal <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if not np.linalg.norm(n) > 0:
            raise GeometryError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def complement(self) -> "HalfSpace":
        return HalfSpace(-self.normal, -self.offset)


@dataclass(frozen=True, eq=False)
class Face:
    normal: np.ndarray
    offset: float
    ring: np.ndarray

    @cached_property
    def area(self) -> float:
        r = self.ring
        vec = 0.5 * np.cross(r, np.roll(r, -1, axis=0)).sum(axis=0)
        return float(vec @ self.normal)

    @property
    def centroid(self) -> np.ndarray:
        return self.ring.mean(axis=0)


@dataclass(frozen=True)
class InterfacePlane:
    """Plane ``{x : (x - anchor) . unit_normal = 0}``, optionally labelled by Miller indices."""

    unit_normal: np.ndarray
    miller: MillerVector | None = None
    anchor: np.ndarray | None = None

    def __post_init__(self):
        n = np.asarray(self.unit_normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError("interface normal must be a unit vector")
        if self.miller is not None and abs(abs(self.miller.unit @ n) - 1.0) > 1e-12:
            raise GeometryError("interface normal is not parallel to its Miller vector")
        object.__setattr__(self, "unit_normal", n)
        anchor = np.zeros(3) if self.anchor is None else np.asarray(self.anchor, dtype=float)
        object.__setattr__(self, "anchor", anchor)

    @classmethod
    def from_miller(cls, miller, anchor=None) -> "InterfacePlane":
        m = miller if isinstance(miller, MillerVector) else miller_reduce(miller)
        return cls(m.unit, m, anchor)

    @property
    def level(self) -> float:
        return float(self.anchor @ self.unit_normal)

    def side(self, points) -> np.ndarray:
        """Signed distance of `points` from the plane."""
        return np.asarray(points, dtype=float) @ self.unit_normal - self.level


def _lex_positive(n: np.ndarray) -> bool:
    for c in n:
        if abs(c) > 1e-12:
            return c > 0
    return False


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in points:
        if not any(np.abs(p - q).max() <= tol for q in out):
            out.append(p)
    return np.array(out).reshape(-1, 3)


def _order_ring(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Sort coplanar points counter-clockwise about `normal`."""
    c = points.mean(axis=0)
    u = points[np.argmax(np.linalg.norm(points - c, axis=1))] - c
    u -= (u @ normal) * normal
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    d = points - c
    ang = np.arctan2(d @ v, d @ u)
    return points[np.argsort(ang, kind="stable")]


def _edge_point(p, q, dp, dq):
    # canonical direction so the shared edge of two faces yields identical floats
    if tuple(p) > tuple(q):
        p, q, dp, dq = q, p, dq, dp
    return p + (dp / (dp - dq)) * (q - p)


class ConvexPolytope:
    """Bounded convex polytope.  Immutable; an empty polytope has no faces."""

    def __init__(self, faces: list[Face], miller_normals: tuple | None = None):
        self.faces = tuple(faces)
        self.miller_normals = miller_normals

    # -- construction ---------------------------------------------------------
    @classmethod
    def empty(cls) -> "ConvexPolytope":
        return cls([])

    # -- basic measures -------------------------------------------------------
    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    @cached_property
    def vertices(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 3))
        pts = np.concatenate([f.ring for f in self.faces])
        tol = REL_TOL * max(1.0, float(np.ptp(pts, axis=0).max()))
        return _dedupe(pts, tol)

    @cached_property
    def diameter(self) -> float:
        v = self.vertices
        if len(v) < 2:
            return 0.0
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d**2).sum(-1).max()))

    @cached_property
    def volume(self) -> float:
        if self.is_empty:
            return 0.0
        c = self.vertices.mean(axis=0)
        vol = sum(f.area * (f.offset - c @ f.normal) for f in self.faces) / 3.0
        return max(float(vol), 0.0)

    @property
    def surface_area(self) -> float:
        return float(sum(f.area for f in self.faces))

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.faces]).reshape(-1, 3)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.faces])

    @property
    def halfspaces(self) -> list[HalfSpace]:
        return [HalfSpace(f.normal, f.offset) for f in self.faces]

    def _tol(self, rel=REL_TOL) -> float:
        return rel * max(self.diameter, 1e-300)

    def contains(self, points, rule: str = CLOSED) -> np.ndarray:
        """Membership of `points` (N, 3) under the closed or half-open boundary rule.

        Half-open drops the faces whose outward normal is lexicographically
        positive, which makes the translates of a half-open box tile space.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_empty:
            return np.zeros(len(pts), dtype=bool)
        tol = self._tol(MEMBERSHIP_TOL)
        s = pts @ self.normals.T - self.offsets
        if rule == CLOSED:
            return np.all(s <= tol, axis=1)
        if rule != HALF_OPEN:
            raise ValueError(f"unknown boundary rule {rule!r}")
        open_faces = np.array([_lex_positive(f.normal) for f in self.faces])
        ok = np.where(open_faces, s < -tol, s <= tol)
        return np.all(ok, axis=1)

    def translate(self, shift) -> "ConvexPolytope":
        t = np.asarray(shift, dtype=float)
        faces = [Face(f.normal, f.offset + float(f.normal @ t), f.ring + t) for f in self.faces]
        return ConvexPolytope(faces, self.miller_normals)

    # -- clipping ---------------------------------------------------------------
    def clip(self, hs: HalfSpace, tol: float | None = None) -> "ConvexPolytope":
        """Intersection with the half-space `hs`; an empty polytope if nothing is left."""
        if self.is_empty:
            return self
        scale = np.linalg.norm(hs.normal)
        n = hs.normal / scale
        c = hs.offset / scale
        tol = self._tol() if tol is None else tol
        dist_v = self.vertices @ n - c
        if dist_v.max() <= tol:
            return self
        if dist_v.min() >= -tol:
            return ConvexPolytope.empty()

        new_faces: list[Face] = []
        cap: list[np.ndarray] = []
        for f in self.faces:
            ring = f.ring
            d = ring @ n - c
            out = []
            m = len(ring)
            for i in range(m):
                p, q = ring[i], ring[(i + 1) % m]
                dp, dq = d[i], d[(i + 1) % m]
                if dp <= tol:
                    out.append(p)
                    if abs(dp) <= tol:
                        cap.append(p)
                if (dp < -tol and dq > tol) or (dp > tol and dq < -tol):
                    x = _edge_point(p, q, dp, dq)
                    out.append(x)
                    cap.append(x)
            if len(out) >= 3:
                face = Face(f.normal, f.offset, np.array(out))
                ring2 = _dedupe(face.ring, tol)
                if len(ring2) >= 3:
                    face = Face(f.normal, f.offset, _order_ring(ring2, f.normal))
                    if face.area > tol * tol:
                        new_faces.append(face)
        coplanar = any(f.normal @ n > 1 - 1e-12 and abs(f.offset - c) <= tol for f in self.faces)
        if not coplanar and len(cap) >= 3:
            pts = _dedupe(np.array(cap), tol)
            if len(pts) >= 3:
                face = Face(n, c, _order_ring(pts, n))
                if face.area > tol * tol:
                    new_faces.append(face)
        if len(new_faces) < 4:
            return ConvexPolytope.empty()
        return ConvexPolytope(new_faces)

    def intersect(self, other: "ConvexPolytope") -> "ConvexPolytope":
        out = self
        for hs in other.halfspaces:
            out = out.clip(hs)
            if out.is_empty:
                break
        return out

    # -- lattice data -----------------------------------------------------------
    def face_miller_normals(self, lattice: BravaisLattice | None = None,
                            scale: float = 1.0) -> tuple[MillerVector, ...]:
        """Outward Miller normal of every face, from lattice-point vertices.

        Raises GeometryError when a face has fewer than three lattice-point
        vertices (the polytope is then not a lattice polyhedron for `scale*L`).
        """
        lattice = lattice or BravaisLattice()
        out = []
        for f in self.faces:
            c = lattice.to_lattice(f.ring) / scale
            ci = np.rint(c)
            if np.abs(c - ci).max() > 1e-9:
                raise GeometryError("face has a vertex that is not a lattice point")
            ci = ci.astype(np.int64)
            h = np.cross(ci[1] - ci[0], ci[2] - ci[0])
            if not np.any(h):
                raise GeometryError("degenerate face ring")
            m = miller_reduce(h)
            if lattice.reciprocal(m.components) @ f.normal < 0:
                m = -m
            out.append(m)
        return tuple(out)

    def is_lattice_polyhedron(self, lattice: BravaisLattice | None = None) -> bool:
        try:
            self.face_miller_normals(lattice)
        except GeometryError:
            return False
        return not self.is_empty

    def with_miller_normals(self, lattice: BravaisLattice | None = None) -> "ConvexPolytope":
        return ConvexPolytope(self.faces, self.face_miller_normals(lattice))

    # -- quadrature support -----------------------------------------------------
    def tetrahedra(self) -> np.ndarray:
        """(T, 4, 3) array of tetrahedra fanning every face from the vertex centroid."""
        if self.is_empty:
            return np.zeros((0, 4, 3))
        c = self.vertices.mean(axis=0)
        tets = []
        for f in self.faces:
            r = f.ring
            for i in range(1, len(r) - 1):
                tets.append([c, r[0], r[i], r[i + 1]])
        return np.array(tets)

    def to_dict(self) -> dict:
        return {
            "type": "halfspaces",
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
        }

    def __repr__(self):
        if self.is_empty:
            return "ConvexPolytope(empty)"
        return f"ConvexPolytope({len(self.faces)} faces, volume={self.volume:.6g})"


# -- constructors -------------------------------------------------------------------

def _box_faces(lo, hi) -> list[Face]:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = np.array([[(lo, hi)[b][i] for i, b in enumerate(bits)]
                        for bits in np.ndindex(2, 2, 2)])
    faces = []
    for axis in range(3):
        for sign, val in ((-1.0, lo[axis]), (1.0, hi[axis])):
            n = np.zeros(3)
            n[axis] = sign
            pts = corners[np.isclose(corners[:, axis], val)]
            faces.append(Face(n, sign * val, _order_ring(pts, n)))
    return faces


def box(lo, hi) -> ConvexPolytope:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
        raise GeometryError("box needs max > min in every coordinate")
    return ConvexPolytope(_box_faces(lo, hi))


def from_halfspaces(normals, offsets) -> ConvexPolytope:
    """Bounded intersection of ``{x : normals[i] . x <= offsets[i]}``."""
    A = np.asarray(normals, dtype=float).reshape(-1, 3)
    b = np.asarray(offsets, dtype=float).reshape(-1)
    if len(A) != len(b):
        raise GeometryError("normals and offsets differ in length")
    if np.any(np.linalg.norm(A, axis=1) == 0):
        raise GeometryError("zero half-space normal")
    lo, hi = np.empty(3), np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        for sign, store in ((1.0, lo), (-1.0, hi)):
            res = linprog(sign * e, A_ub=A, b_ub=b, bounds=[(None, None)] * 3, method="highs")
            if res.status == 3:
                raise GeometryError("half-spaces do not bound a region")
            if res.status == 2:
                raise GeometryError("half-spaces have empty intersection")
            if res.status != 0:
                raise GeometryError(f"bounding LP failed: {res.message}")
            store[i] = res.x[i]
    pad = 1e-3 * max(float(np.max(hi - lo)), 1.0)
    poly = ConvexPolytope(_box_faces(lo - pad, hi + pad))
    for a, c in zip(A, b):
        poly = poly.clip(HalfSpace(a, c))
        if poly.is_empty:
            raise GeometryError("half-spaces enclose no volume")
    return poly


def hull(vertices) -> ConvexPolytope:
    """Convex hull of a point cloud; coplanar hull triangles are merged into polygon faces."""
    pts = np.asarray(vertices, dtype=float)
    try:
        ch = ConvexHull(pts)
    except (QhullError, ValueError) as exc:
        raise GeometryError(f"degenerate hull: {exc}") from None
    ext = pts[ch.vertices]
    tol = REL_TOL * max(1.0, float(np.ptp(ext, axis=0).max()))
    planes: dict[tuple, np.ndarray] = {}
    for row in ch.equations:
        planes.setdefault(tuple(np.round(row, 7)), row)
    faces = []
    for row in planes.values():
        n, d = row[:3], -row[3]
        on = ext[np.abs(ext @ n - d) <= tol]
        faces.append(Face(n, float(d), _order_ring(on, n)))
    return ConvexPolytope(faces)


def polytope_from_dict(d: dict) -> ConvexPolytope:
    kind = d.get("type")
    if kind == "box":
        return box(d["min"], d["max"])
    if kind == "hull":
        return hull(d["vertices"])
    if kind == "halfspaces":
        return from_halfspaces(d["normals"], d["offsets"])
    raise GeometryError(f"unknown domain type {kind!r}")


# -- operations ---------------------------------------------------------------------

def clip(poly: ConvexPolytope, hs: HalfSpace) -> ConvexPolytope:
    return poly.clip(hs)


def measure(poly: ConvexPolytope) -> tuple[float, list[tuple[float, np.ndarray]]]:
    """Volume and the (area, outward unit normal) of every facet."""
    return poly.volume, [(f.area, f.normal.copy()) for f in poly.faces]


def self_intersection_volume(poly: ConvexPolytope, shift) -> float:
    """Volume of ``poly ∩ (poly - shift)``."""
    t = np.asarray(shift, dtype=float)
    if poly.is_empty or np.linalg.norm(t) >= poly.diameter:
        return 0.0
    out = poly
    for f in poly.faces:
        out = out.clip(HalfSpace(f.normal, f.offset - f.normal @ t))
        if out.is_empty:
            return 0.0
    return out.volume


def shifted_intersection(poly: ConvexPolytope, shift) -> ConvexPolytope:
    t = np.asarray(shift, dtype=float)
    if poly.is_empty or np.linalg.norm(t) >= poly.diameter:
        return ConvexPolytope.empty()
    out = poly
    for f in poly.faces:
        out = out.clip(HalfSpace(f.normal, f.offset - f.normal @ t))
        if out.is_empty:
            break
    return out


def split_by_plane(poly: ConvexPolytope, plane: InterfacePlane):
    """Return ``(plus, minus, sigma_area, sigma_ring)``.

    `plus` is ``{x in poly : (x - anchor) . n >= 0}`` and `minus` the rest; the
    interface polygon is the cap face of `minus`.
    """
    n = plane.unit_normal
    s0 = plane.level
    plus = poly.clip(HalfSpace(-n, -s0))
    minus = poly.clip(HalfSpace(n, s0))
    vol = poly.volume
    if plus.volume <= REL_TOL * vol or minus.volume <= REL_TOL * vol:
        raise GeometryError("interface plane does not cut the interior of the domain")
    cap = [f for f in minus.faces if f.normal @ n > 1 - 1e-12 and abs(f.offset - s0) <= minus._tol()]
    ring = cap[0].ring if cap else np.zeros((0, 3))
    area = cap[0].area if cap else 0.0
    return plus, minus, area, ring


def _section_points(poly: ConvexPolytope, n: np.ndarray, s: float, tol: float) -> np.ndarray:
    pts = []
    for f in poly.faces:
        r = f.ring
        d = r @ n - s
        m = len(r)
        for i in range(m):
            dp, dq = d[i], d[(i + 1) % m]
            if abs(dp) <= tol:
                pts.append(r[i])
            elif (dp < -tol and dq > tol) or (dp > tol and dq < -tol):
                pts.append(_edge_point(r[i], r[(i + 1) % m], dp, dq))
    if len(pts) < 3:
        return np.zeros((0, 3))
    return _dedupe(np.array(pts), tol)


def cross_section_area(poly: ConvexPolytope, unit_normal, s: float) -> float:
    """Area of ``poly ∩ {x : x . unit_normal = s}``."""
    if poly.is_empty:
        return 0.0
    n = np.asarray(unit_normal, dtype=float)
    n = n / np.linalg.norm(n)
    h = poly.vertices @ n
    tol = poly._tol()
    if s < h.min() - tol or s > h.max() + tol:
        return 0.0
    pts = _section_points(poly, n, s, tol)
    if len(pts) < 3:
        return 0.0
    ring = _order_ring(pts, n)
    vec = 0.5 * np.cross(ring, np.roll(ring, -1, axis=0)).sum(axis=0)
    return float(abs(vec @ n))


def cross_section_breakpoints(poly: ConvexPolytope, unit_normal) -> np.ndarray:
    """Sorted distinct vertex heights; the section area is quadratic between them."""
    n = np.asarray(unit_normal, dtype=float)
    h = np.sort(poly.vertices @ (n / np.linalg.norm(n)))
    tol = poly._tol()
    keep = np.concatenate([[True], np.diff(h) > tol])
    return h[keep]


def offset_facets(poly: ConvexPolytope, distances) -> ConvexPolytope:
    """Push face ``i`` outward by ``distances[i]`` keeping every face and vertex."""
    dist = np.asarray(distances, dtype=float)
    if dist.shape != (len(poly.faces),):
        raise GeometryError("need one distance per face")
    if not np.any(dist):
        return poly
    out = from_halfspaces(poly.normals, poly.offsets + dist)
    if len(out.faces) != len(poly.faces) or len(out.vertices) != len(poly.vertices):
        raise GeometryError("facet offsets changed the combinatorics of the polytope")
    order = []
    for f in poly.faces:
        k = int(np.argmax(out.normals @ f.normal))
        order.append(out.faces[k])
    return ConvexPolytope(order, poly.miller_normals)


# -- quadrature rules ---------------------------------------------------------------

def gauss_legendre_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the reference triangle; barycentric (xi, eta) and weights summing to 1/2."""
    x, w = gauss_legendre_01(order)
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u
    eta = v * (1 - u)
    return np.stack([xi.ravel(), eta.ravel()], axis=1), (wu * wv * (1 - u)).ravel()


def tetrahedron_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) tensor Gauss rule on the reference tetrahedron; weights sum to 1/6."""
    x, w = gauss_legendre_01(order)
    u, v, t = np.meshgrid(x, x, x, indexing="ij")
    wu, wv, wt = np.meshgrid(w, w, w, indexing="ij")
    xi = u
    eta = v * (1 - u)
    zeta = t * (1 - u) * (1 - v)
    jac = (1 - u) ** 2 * (1 - v)
    pts = np.stack([xi.ravel(), eta.ravel(), zeta.ravel()], axis=1)
    return pts, (wu * wv * wt * jac).ravel()


def polytope_quadrature(poly: ConvexPolytope, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points and weights over `poly` (sum of weights equals its volume)."""
    tets = poly.tetrahedra()
    if len(tets) == 0:
        return np.zeros((0, 3)), np.zeros(0)
    ref, w = tetrahedron_rule(order)
    edges = tets[:, 1:, :] - tets[:, :1, :]  # (T, 3, 3)
    dets = np.abs(np.linalg.det(edges))
    pts = tets[:, None, 0, :] + np.einsum("qk,tkj->tqj", ref, edges)
    wts = dets[:, None] * w[None, :]
    return pts.reshape(-1, 3), wts.ravel()


def face_quadrature(face: Face, order: int) -> tuple[np.ndarray, np.ndarray]:
    ref, w = triangle_rule(order)
    r = face.ring
    pts, wts = [], []
    for i in range(1, len(r) - 1):
        e1, e2 = r[i] - r[0], r[i + 1] - r[0]
        area2 = np.linalg.norm(np.cross(e1, e2))
        pts.append(r[0] + ref[:, :1] * e1 + ref[:, 1:] * e2)
        wts.append(area2 * w)
    return np.concatenate(pts), np.concatenate(wts)


def unit_ball_polytope(radius: float = 1.0, refinement: int = 12) -> ConvexPolytope:
    """Convex polytope inscribed in a ball, vertices on a latitude/longitude grid."""
    n_lat = max(refinement // 2, 2)
    pts = [[0, 0, radius], [0, 0, -radius]]
    for i in range(1, n_lat):
        th = math.pi * i / n_lat
        for j in range(refinement):
            ph = 2 * math.pi * j / refinement
            pts.append([radius * math.sin(th) * math.cos(ph),
                        radius * math.sin(th) * math.sin(ph), radius * math.cos(th)])
    return hull(pts)
