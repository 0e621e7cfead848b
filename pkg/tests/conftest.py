from __future__ import annotations

import math

import numpy as np
import pytest

from cellavg.material import builtin_potential, zero_potential

SQ2, SQ3 = math.sqrt(2.0), math.sqrt(3.0)

# closed forms for phi(r) = (r - 2)^2 on the integer lattice, F = I
W_IDENTITY = 67 - 24 * SQ2 - 16 * SQ3
GAMMA_E3 = -0.25 * (106 - 32 * SQ2 - 32 * SQ3)
GAMMA_DIAMOND_001 = 0.25 * (28 - 16 * SQ2)
TAU_HAT_UNIT_SHEAR = 53 - 16 * SQ2 - 16 * SQ3
CUBE_HALF_EPS_ENERGY = 14 - 6 * SQ2 - 2 * SQ3


@pytest.fixture
def phi_ref():
    return builtin_potential("quadratic_cutoff", cutoff=2.0)


@pytest.fixture
def phi_zero():
    return zero_potential()


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_F(rng, spread=0.15) -> np.ndarray:
    """Random matrix near a rotation with singular values in [1 - spread, 1 + spread]."""
    u, v = random_rotation(rng), random_rotation(rng)
    return u @ np.diag(rng.uniform(1 - spread, 1 + spread, 3)) @ v


ACCEPTANCE_LINES: list[str] = []


def record_criterion(tag: str, ok: bool, detail: str) -> None:
    line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
