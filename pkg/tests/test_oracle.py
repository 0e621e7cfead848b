from __future__ import annotations

import math

import numpy as np
import pytest

from cellavg.energy import cell_avg_energy, gamma, sigma_hat
from cellavg.geometry import InterfacePlane, box, unit_ball_polytope
from cellavg.material import Affine, PiecewiseAffine
from cellavg.oracle import dense_path_integral, offset_grid, translate_average_count, translate_average_energy

I = np.eye(3)
E3 = np.array([0, 0, 1.0])


def test_offset_grid_midpoints():
    U = offset_grid(__import__("cellavg").integer_lattice(), 0.5, 4)
    assert U.shape == (64, 3)
    assert U.min() == pytest.approx(0.0625) and U.max() == pytest.approx(0.4375)


@pytest.mark.parametrize("eps", [0.5, 0.3, 0.17])
def test_count_unit_cube(eps):
    assert translate_average_count(box([0, 0, 0], [1, 1, 1]), None, eps, 64) == pytest.approx(1.0, abs=3 / 64)


def test_count_small_box():
    assert translate_average_count(box([0, 0, 0], [0.5] * 3), None, 0.2, 32) == pytest.approx(0.125, abs=3 * 1.5 / 32 * 0.2)


def test_count_ball():
    # inscribed polytope with 512 faces; its own volume is within 2% of the ball's
    ball = unit_ball_polytope(1.0, 32)
    got = translate_average_count(ball, None, 0.25, 32)
    assert got == pytest.approx(4 * math.pi / 3, rel=0.03)
    assert got == pytest.approx(ball.volume, rel=3 * 4 * math.pi * 0.25 / 32)


def test_count_error_first_order():
    dom = box([0, 0, 0], [7 / 3] * 3)
    errs = [abs(translate_average_count(dom, None, 0.5, g) - dom.volume) for g in (8, 16, 32, 64)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.6 < r < 2.5 for r in ratios)


def test_energy_trivial(phi_ref, phi_zero):
    cube = box([0, 0, 0], [1, 1, 1])
    assert translate_average_energy(cube, None, 0.5, Affine(I), phi_zero, 8) == 0.0
    assert translate_average_energy(cube, None, 2.0, Affine(I), phi_ref, 8) == 0.0


def test_energy_agrees_with_cell_average(phi_ref):
    dom = box([0, 0, 0], [4 / 3] * 3)
    F = np.array([[1.05, 0.1, 0], [0, 0.98, 0.05], [0, 0, 1.02]])
    ref = cell_avg_energy(dom, None, 0.5, Affine(F), phi_ref)
    gaps = [abs(translate_average_energy(dom, None, 0.5, Affine(F), phi_ref, g) / ref - 1) for g in (8, 16)]
    assert gaps[1] < 0.05
    assert gaps[1] < 0.7 * gaps[0]


def test_energy_agrees_piecewise(phi_ref):
    dom = box([0, 0, -2 / 3], [4 / 3, 4 / 3, 4 / 3])
    d = PiecewiseAffine(I, [0.3, 0, 0], InterfacePlane(E3))
    ref = cell_avg_energy(dom, None, 0.5, d, phi_ref)
    gaps = [abs(translate_average_energy(dom, None, 0.5, d, phi_ref, g) / ref - 1) for g in (8, 16)]
    assert gaps[1] < 0.03
    assert gaps[1] < 0.7 * gaps[0]


def test_dense_path_trivial(phi_ref, phi_zero):
    assert dense_path_integral(phi_ref, None, I, I, E3, 1000) == pytest.approx(-2 * gamma(phi_ref, I, E3), rel=1e-14)
    assert dense_path_integral(phi_zero, None, I, I, E3, 1000) == 0.0


def test_dense_path_self_convergence(phi_ref):
    Fp = I + np.outer([1, 0, 0], E3)
    vals = [dense_path_integral(phi_ref, None, Fp, I, E3, s) for s in (1000, 2000, 4000, 8000)]
    steps = [abs(b - a) for a, b in zip(vals, vals[1:])]
    assert all(b < a for a, b in zip(steps, steps[1:]))
    a, b = dense_path_integral(phi_ref, None, Fp, I, E3, 100_000), dense_path_integral(phi_ref, None, Fp, I, E3, 200_000)
    assert abs(b - a) < 1e-10
    assert sigma_hat(phi_ref, Fp, I, E3) == pytest.approx(b, abs=1e-8)


def test_dense_path_rejects_coarse(phi_ref):
    with pytest.raises(ValueError):
        dense_path_integral(phi_ref, None, I, I, E3, 10)
