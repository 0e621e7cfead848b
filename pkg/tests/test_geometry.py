from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellavg.geometry import (
    GeometryError,
    HalfSpace,
    InterfacePlane,
    box,
    clip,
    cross_section_area,
    cross_section_breakpoints,
    from_halfspaces,
    gauss_legendre_01,
    hull,
    measure,
    offset_facets,
    polytope_quadrature,
    self_intersection_volume,
    split_by_plane,
)
from cellavg.lattice import CLOSED, enumerate_in_region, integer_lattice

CUBE = box([0, 0, 0], [1, 1, 1])
TET = hull([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
unit_vectors = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


def monte_carlo_volume(poly, n=400_000, seed=0):
    rng = np.random.default_rng(seed)
    V = poly.vertices
    lo, hi = V.min(axis=0), V.max(axis=0)
    pts = rng.uniform(lo, hi, size=(n, 3))
    return np.prod(hi - lo) * poly.contains(pts).mean()


def test_clip_examples():
    assert clip(CUBE, HalfSpace([1, 0, 0], 0.5)).volume == pytest.approx(0.5, rel=1e-14)
    assert clip(CUBE, HalfSpace([1, 0, 0], 2.0)).volume == pytest.approx(1.0, rel=1e-14)
    corner = clip(CUBE, HalfSpace(np.ones(3) / math.sqrt(3), 0.5 / math.sqrt(3)))
    assert corner.volume == pytest.approx(0.5**3 / 6, rel=1e-12)
    assert monte_carlo_volume(corner) == pytest.approx(0.5**3 / 6, rel=0.05)


def test_measure_examples():
    vol, facets = measure(CUBE)
    assert vol == pytest.approx(1.0)
    assert sorted(a for a, _ in facets) == pytest.approx([1.0] * 6)
    vol, facets = measure(box([0, 0, 0], [2, 1, 1]))
    assert vol == pytest.approx(2.0)
    assert sorted(a for a, _ in facets) == pytest.approx([1, 1, 2, 2, 2, 2])
    vol, facets = measure(TET)
    assert vol == pytest.approx(1 / 6)
    slanted = [(a, n) for a, n in facets if np.allclose(n, np.ones(3) / math.sqrt(3))]
    assert len(slanted) == 1 and slanted[0][0] == pytest.approx(math.sqrt(3) / 2)


@pytest.mark.parametrize("d", [0.0, 0.25, 0.7, 1.0])
def test_self_intersection_axis(d):
    assert self_intersection_volume(CUBE, [d, 0, 0]) == pytest.approx(1 - d, abs=1e-14)
    assert self_intersection_volume(CUBE, [d, d, 0]) == pytest.approx((1 - d) ** 2, abs=1e-14)


def test_self_intersection_disjoint():
    assert self_intersection_volume(CUBE, [2, 0, 0]) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.floats(-0.9, 0.9)] * 3))
def test_self_intersection_symmetric(t):
    t = np.array(t)
    assert self_intersection_volume(TET, t) == pytest.approx(self_intersection_volume(TET, -t), abs=1e-13)


def test_self_intersection_first_order():
    # [vol - V(eps)] / eps -> sum_f area_f <w . n_f>_+
    poly = hull([[0, 0, 0], [2, 0, 0], [0, 3, 0], [0, 0, 1], [1, 1, 1]])
    w = np.array([0.3, -0.5, 0.8])
    slope = sum(f.area * max(0.0, w @ f.normal) for f in poly.faces)
    for eps in (1e-3, 1e-4):
        est = (poly.volume - self_intersection_volume(poly, eps * w)) / eps
        assert est == pytest.approx(slope, rel=10 * eps)


@settings(max_examples=50, deadline=None)
@given(unit_vectors, st.floats(-0.4, 0.4))
def test_clip_complement_volumes_add(n, c):
    n = np.array(n) / np.linalg.norm(n)
    poly = hull([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0.6, 0.6, 0.6]])
    hs = HalfSpace(n, c + n @ np.full(3, 0.3))
    total = clip(poly, hs).volume + clip(poly, hs.complement()).volume
    assert total == pytest.approx(poly.volume, rel=1e-12)


def test_split_examples():
    cube = box([-0.5] * 3, [0.5] * 3)
    plus, minus, area, ring = split_by_plane(cube, InterfacePlane(np.array([0, 0, 1.0])))
    assert (plus.volume, minus.volume, area) == pytest.approx((0.5, 0.5, 1.0))
    n = np.array([1, 1, 0]) / math.sqrt(2)
    plus, minus, area, _ = split_by_plane(cube, InterfacePlane(n))
    assert (plus.volume, minus.volume, area) == pytest.approx((0.5, 0.5, math.sqrt(2)))


def test_split_tetrahedron_volumes():
    tet = hull([[-1, -1, -1], [2, 0, -1], [0, 2, -1], [0, 0, 2]])
    plus, minus, _, _ = split_by_plane(tet, InterfacePlane(np.array([0, 0, 1.0])))
    assert plus.volume + minus.volume == pytest.approx(tet.volume, rel=1e-12)
    assert plus.volume == pytest.approx(monte_carlo_volume(plus), rel=0.05)


def test_split_not_cutting_raises():
    with pytest.raises(GeometryError):
        split_by_plane(CUBE, InterfacePlane(np.array([0, 0, 1.0])))


def test_cross_section_examples():
    assert cross_section_area(CUBE, [0, 0, 1], 0.5) == pytest.approx(1.0)
    assert cross_section_area(CUBE, [0, 0, 1], 1.5) == 0.0
    n = np.ones(3) / math.sqrt(3)
    s = 1.5 / math.sqrt(3)
    # regular hexagon with side sqrt(2)/2
    assert cross_section_area(CUBE, n, s) == pytest.approx(3 * math.sqrt(3) / 4, rel=1e-12)
    h = 1e-3
    slab = clip(clip(CUBE, HalfSpace(n, s + h / 2)), HalfSpace(-n, -(s - h / 2)))
    assert slab.volume / h == pytest.approx(3 * math.sqrt(3) / 4, rel=1e-5)


def test_cross_section_integrates_to_volume():
    poly = hull([[0, 0, 0], [2, 0, 0], [0, 3, 0], [0, 0, 1], [1, 1, 1]])
    n = np.array([0.2, 0.5, 0.8])
    n /= np.linalg.norm(n)
    brk = cross_section_breakpoints(poly, n)
    x, w = gauss_legendre_01(4)
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        total += (b - a) * sum(wi * cross_section_area(poly, n, a + (b - a) * xi) for xi, wi in zip(x, w))
    assert total == pytest.approx(poly.volume, rel=1e-12)


@pytest.mark.parametrize("k", [2, 5, 17, 40])
def test_offset_cube(k):
    out = offset_facets(CUBE, np.full(6, 1 / (2 * k)))
    assert out.volume == pytest.approx((1 + 1 / k) ** 3, rel=1e-14)
    L = integer_lattice()
    assert len(enumerate_in_region(L, 1 / k, out, CLOSED)) == (k + 1) ** 3


def test_offset_zero_and_two_facets():
    assert offset_facets(CUBE, np.zeros(6)) is CUBE
    d = np.zeros(6)
    idx = [i for i, f in enumerate(CUBE.faces) if abs(f.normal[0]) > 0.5]
    d[idx] = 0.1
    assert offset_facets(CUBE, d).volume == pytest.approx(1.2, rel=1e-14)


def test_offset_combinatorial_change_raises():
    # pushing one facet of a tetrahedron far inward removes a vertex
    d = np.zeros(4)
    d[0] = -10.0
    with pytest.raises(GeometryError):
        offset_facets(TET, d)


def test_from_halfspaces_box():
    N = np.vstack([np.eye(3), -np.eye(3)])
    poly = from_halfspaces(N, [1, 2, 3, 0, 0, 0])
    assert poly.volume == pytest.approx(6.0)


def test_polytope_quadrature_exact_polynomial():
    pts, wts = polytope_quadrature(TET, 4)
    assert wts.sum() == pytest.approx(1 / 6, rel=1e-14)
    # ∫ x y z over the unit simplex = 1/720
    assert np.dot(wts, pts.prod(axis=1)) == pytest.approx(1 / 720, rel=1e-12)


def test_convexity_and_face_invariants():
    poly = hull(np.random.default_rng(3).normal(size=(30, 3)))
    V = poly.vertices
    assert np.all(V @ poly.normals.T <= poly.offsets + 1e-10 * poly.diameter)
    for f in poly.faces:
        assert f.area > 0
        assert np.allclose(f.ring @ f.normal, f.offset, atol=1e-10 * poly.diameter)
    assert poly.volume > 0


def test_lattice_polyhedron_miller_normals():
    cube = CUBE.with_miller_normals()
    got = {tuple(m.components) for m in cube.miller_normals}
    assert got == {(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)}
    assert not box([0, 0, 0], [0.5, 1, 1]).is_lattice_polyhedron()
