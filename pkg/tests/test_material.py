from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellavg.geometry import InterfacePlane
from cellavg.lattice import integer_lattice
from cellavg.material import (
    Affine,
    NonInvertibleDeformationError,
    PiecewiseAffine,
    bilipschitz_lower_bound,
    builtin_potential,
    cauchy_born_W,
    deformation_apply,
    lattice_vectors_in_range,
    potential_eval,
    potential_from_dict,
)
from cellavg.summation import exact_sum

from conftest import W_IDENTITY, random_F, random_rotation

E3 = InterfacePlane(np.array([0, 0, 1.0]))


def test_reference_potential_values(phi_ref):
    assert potential_eval(phi_ref, [1, 0, 0]) == 1.0
    assert potential_eval(phi_ref, [0, 0, 0]) == 0.0
    assert potential_eval(phi_ref, [1, 1, 0]) == pytest.approx(6 - 4 * math.sqrt(2), rel=1e-14)
    assert potential_eval(phi_ref, [2, 0, 0]) == 0.0
    assert potential_eval(phi_ref, [0, 3, 0]) == 0.0


@given(st.tuples(*[st.floats(-3, 3)] * 3))
def test_potential_even(z):
    phi = builtin_potential("quadratic_cutoff")
    z = np.array(z)
    assert phi(z) == phi(-z)


@pytest.mark.parametrize("name,params", [("quadratic_cutoff", {}), ("lj_truncated_shifted", {"cutoff": 2.5}),
                                         ("morse_truncated", {"alpha": 1.5})])
def test_c1_at_cutoff(name, params):
    phi = builtin_potential(name, **params)
    R = phi.cutoff
    r = np.array([R - 1e-6])
    assert abs(phi.radial(r)[0]) + abs(phi.radial_derivative(r)[0]) < 1e-4
    r = np.array([R - 1e-8])
    if name == "quadratic_cutoff":
        assert abs(phi.radial(r)[0]) < 1e-15 and abs(phi.radial_derivative(r)[0]) < 1e-7


def test_lj_zero_at_cutoff():
    phi = builtin_potential("lj_truncated_shifted", sigma=1, epsilon=1, cutoff=2.5)
    assert phi.radial(np.array([2.5]))[0] == 0.0
    assert phi.profile(np.array([2.5]))[0] == 0.0


def test_serialization_roundtrip():
    phi = builtin_potential("morse_truncated", depth=0.7, alpha=1.3, r0=1.1, cutoff=2.2)
    d = json.loads(json.dumps(phi.to_dict()))
    assert d["params"] == {"depth": 0.7, "alpha": 1.3, "r0": 1.1, "cutoff": 2.2}
    back = potential_from_dict(d)
    r = np.linspace(0.5, 2.3, 50)
    assert np.array_equal(back.radial(r), phi.radial(r))


def test_unknown_potential():
    with pytest.raises(ValueError):
        builtin_potential("nope")


def test_deformation_apply_examples():
    assert np.array_equal(deformation_apply(Affine(np.eye(3)), [1, 2, 3]), [1, 2, 3])
    d = PiecewiseAffine(np.eye(3), [1, 0, 0], E3)
    assert np.allclose(deformation_apply(d, [0, 0, 1]), [1, 0, 1])
    assert np.allclose(deformation_apply(d, [0, 0, -1]), [0, 0, -1])


def test_affine_requires_positive_det():
    with pytest.raises(NonInvertibleDeformationError):
        Affine(np.diag([1, 1, -1.0]))


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1),
       st.tuples(*[st.floats(-1, 1)] * 3))
def test_piecewise_continuity(ray, a):
    d = PiecewiseAffine(np.eye(3) + 0.1 * np.diag([1, -1, 0.5]), a, E3)
    x = np.array(ray)
    x[2] = 0.0
    up, down = d.apply(x + [0, 0, 1e-12]), d.apply(x - [0, 0, 1e-12])
    assert np.linalg.norm(up - down) <= 1e-9 * max(1.0, np.linalg.norm(x))


def test_lower_bound_examples():
    assert bilipschitz_lower_bound(Affine(2 * np.eye(3))) == pytest.approx(2.0)
    assert bilipschitz_lower_bound(Affine(np.eye(3))) == pytest.approx(1.0)
    d = PiecewiseAffine(np.eye(3), [0.1, 0, 0], E3)
    lam = bilipschitz_lower_bound(d)
    ts = np.linspace(0, 1, 10_001)
    dense = min(np.linalg.svd(np.eye(3) + t * np.outer([0.1, 0, 0], [0, 0, 1]), compute_uv=False)[-1] for t in ts)
    assert 0.9 <= lam <= 1.0
    assert lam == pytest.approx(dense, abs=1e-9)
    assert lam <= dense + 1e-12


def test_W_identity(phi_ref):
    assert cauchy_born_W(phi_ref, np.eye(3)) == pytest.approx(W_IDENTITY, rel=1e-14)
    assert cauchy_born_W(phi_ref, 3 * np.eye(3)) == 0.0


def test_W_shell_enumeration(phi_ref):
    # 6 phi(1) + 12 phi(sqrt 2) + 8 phi(sqrt 3), halved
    shells = 6 * 1 + 12 * (math.sqrt(2) - 2) ** 2 + 8 * (math.sqrt(3) - 2) ** 2
    assert cauchy_born_W(phi_ref, np.eye(3)) == pytest.approx(shells / 2, rel=1e-14)


def test_W_frame_indifference(phi_ref):
    rng = np.random.default_rng(7)
    for _ in range(20):
        F, Q = random_F(rng), random_rotation(rng)
        assert cauchy_born_W(phi_ref, Q @ F) == pytest.approx(cauchy_born_W(phi_ref, F), rel=1e-12)


def test_W_evenness(phi_ref):
    rng = np.random.default_rng(8)
    F = random_F(rng)
    ws = lattice_vectors_in_range(phi_ref, integer_lattice(), np.linalg.svd(F, compute_uv=False)[-1])
    half = ws[[tuple(w) > (0, 0, 0) for w in ws]]
    # W = (1/2) * 2 * sum over one representative of each +-w pair
    assert exact_sum(phi_ref(half @ F.T)) == pytest.approx(cauchy_born_W(phi_ref, F), rel=1e-12)


def test_W_lipschitz_in_F(phi_ref):
    rng = np.random.default_rng(9)
    F = np.eye(3) + 0.03 * rng.normal(size=(3, 3))
    W0 = cauchy_born_W(phi_ref, F)
    for _ in range(10):
        A = rng.normal(size=(3, 3))
        A /= np.linalg.norm(A)
        for delta in (1e-3, 1e-4):
            assert abs(cauchy_born_W(phi_ref, F + delta * A) - W0) <= 200 * delta


def test_W_zero_potential(phi_zero):
    assert cauchy_born_W(phi_zero, np.eye(3)) == 0.0
