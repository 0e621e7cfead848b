"""Pair potentials, deformation maps and the Cauchy-Born stored energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import InterfacePlane
from .lattice import BravaisLattice, enumerate_ball, integer_lattice
from .summation import exact_sum

__all__ = [
    "NonInvertibleDeformationError",
    "PairPotential",
    "builtin_potential",
    "potential_from_dict",
    "zero_potential",
    "Affine",
    "PiecewiseAffine",
    "SmoothMap",
    "deformation_apply",
    "bilipschitz_lower_bound",
    "smallest_singular_value",
    "segment_lower_bound",
    "cauchy_born_W",
]

INVERTIBILITY_TOL = 1e-10


class NonInvertibleDeformationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PairPotential:
    """Radial pair potential ``Phi(z) = phi(|z|)`` with finite range.

    ``profile`` and ``derivative`` act on arrays of radii; values at r >= cutoff
    and at r = 0 are forced to zero by :meth:`radial` and :meth:`__call__`.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    cutoff: float
    derivative: Callable[[np.ndarray], np.ndarray] | None = None
    decay_exponent: float = 1.0
    smoothness: str = "C1"
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = (r > 0) & (r < self.cutoff)
        out = np.zeros_like(r)
        if np.any(inside):
            out[inside] = self.profile(r[inside])
        return out

    def radial_derivative(self, r) -> np.ndarray:
        if self.derivative is None:
            raise NotImplementedError(f"potential {self.name!r} has no derivative")
        r = np.asarray(r, dtype=float)
        inside = (r > 0) & (r < self.cutoff)
        out = np.zeros_like(r)
        if np.any(inside):
            out[inside] = self.derivative(r[inside])
        return out

    def __call__(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=float)
        val = self.radial(np.linalg.norm(z, axis=-1))
        return float(val) if val.ndim == 0 else val

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def to_dict(self) -> dict:
        if self.name == "custom":
            raise ValueError("custom potentials cannot be serialized")
        return {"name": self.name, "params": dict(self.params)}


def potential_eval(potential: PairPotential, z) -> float:
    return potential(z)


def _quadratic_cutoff(cutoff=2.0, amplitude=1.0) -> PairPotential:
    R, A = float(cutoff), float(amplitude)
    return PairPotential(
        profile=lambda r: A * (r - R) ** 2,
        derivative=lambda r: 2 * A * (r - R),
        cutoff=R, decay_exponent=1.0, smoothness="C1",
        name="quadratic_cutoff", params={"cutoff": R, "amplitude": A},
    )


def _force_shifted(v, dv, R):
    vR, dvR = v(R), dv(R)
    return (lambda r: v(r) - vR - (r - R) * dvR), (lambda r: dv(r) - dvR)


def _lj(sigma=1.0, epsilon=1.0, cutoff=2.5) -> PairPotential:
    s, e, R = float(sigma), float(epsilon), float(cutoff)

    def v(r):
        x = (s / r) ** 6
        return 4 * e * (x * x - x)

    def dv(r):
        x = (s / r) ** 6
        return 4 * e * (-12 * x * x + 6 * x) / r

    prof, der = _force_shifted(v, dv, R)
    return PairPotential(prof, R, der, decay_exponent=3.0, smoothness="C1",
                         name="lj_truncated_shifted",
                         params={"sigma": s, "epsilon": e, "cutoff": R})


def _morse(depth=1.0, alpha=1.0, r0=1.0, cutoff=2.0) -> PairPotential:
    D, a, r0, R = float(depth), float(alpha), float(r0), float(cutoff)

    def v(r):
        x = np.exp(-a * (r - r0))
        return D * (x * x - 2 * x)

    def dv(r):
        x = np.exp(-a * (r - r0))
        return D * (-2 * a * x * x + 2 * a * x)

    prof, der = _force_shifted(v, dv, R)
    return PairPotential(prof, R, der, decay_exponent=1.0, smoothness="C1",
                         name="morse_truncated",
                         params={"depth": D, "alpha": a, "r0": r0, "cutoff": R})


def zero_potential(cutoff=1.0) -> PairPotential:
    return PairPotential(lambda r: np.zeros_like(r), float(cutoff), lambda r: np.zeros_like(r),
                         name="zero", params={"cutoff": float(cutoff)})


_BUILTINS = {
    "quadratic_cutoff": _quadratic_cutoff,
    "lj_truncated_shifted": _lj,
    "morse_truncated": _morse,
    "zero": zero_potential,
}


def builtin_potential(name: str, **params) -> PairPotential:
    """Named finite-range potential.

    ``quadratic_cutoff``: ``A (r - R)^2`` for r < R (defaults R = 2, A = 1).
    ``lj_truncated_shifted`` and ``morse_truncated``: value and slope shifted to
    vanish at the cutoff.  ``zero``: identically zero.
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(_BUILTINS)}") from None
    if "cutoff" in params and not float(params["cutoff"]) > 0:
        raise ValueError("cutoff must be positive")
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None


def potential_from_dict(d: dict) -> PairPotential:
    return builtin_potential(d["name"], **d.get("params", {}))


# -- deformations -------------------------------------------------------------------

def _matrix(F) -> np.ndarray:
    F = np.array(F, dtype=float)
    if F.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {F.shape}")
    F.setflags(write=False)
    return F


def smallest_singular_value(F) -> float:
    return float(np.linalg.svd(np.asarray(F, dtype=float), compute_uv=False)[-1])


def segment_lower_bound(F_plus, F_minus, grid: int = 201) -> float:
    """min over t in [0, 1] of the smallest singular value of ``t F+ + (1-t) F-``."""
    Fp, Fm = np.asarray(F_plus, float), np.asarray(F_minus, float)
    ts = np.linspace(0.0, 1.0, grid)
    mats = ts[:, None, None] * Fp + (1 - ts)[:, None, None] * Fm
    sv = np.linalg.svd(mats, compute_uv=False)[:, -1]
    i = int(np.argmin(sv))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda t: smallest_singular_value(t * Fp + (1 - t) * Fm),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(sv[i], res.fun))


@dataclass(frozen=True, eq=False)
class Affine:
    F: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "F", _matrix(self.F))
        if np.linalg.det(self.F) <= 0:
            raise NonInvertibleDeformationError("affine deformation needs det F > 0")

    def apply(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.F.T

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.F, x.shape[:-1] + (3, 3))

    def lower_bound(self) -> float:
        return smallest_singular_value(self.F)

    def to_dict(self) -> dict:
        return {"type": "affine", "F": self.F.tolist()}


@dataclass(frozen=True, eq=False)
class PiecewiseAffine:
    """``F+ x`` where ``(x - anchor) . n > 0``, ``F- x`` otherwise, with ``F+ = F- + a ⊗ n``."""

    F_minus: np.ndarray
    a: np.ndarray
    plane: InterfacePlane

    def __post_init__(self):
        object.__setattr__(self, "F_minus", _matrix(self.F_minus))
        a = np.array(self.a, dtype=float)
        if a.shape != (3,):
            raise ValueError("jump vector a must be a 3-vector")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if self.plane.level != 0.0:
            # y continuous across a plane off the origin needs an affine offset; not modelled
            raise ValueError("the interface plane must pass through the origin")

    @property
    def normal(self) -> np.ndarray:
        return self.plane.unit_normal

    @property
    def F_plus(self) -> np.ndarray:
        return self.F_minus + np.outer(self.a, self.normal)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        plus = (x @ self.normal) > 0
        return np.where(plus[..., None], x @ self.F_plus.T, x @ self.F_minus.T)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        plus = (x @ self.normal) > 0
        return np.where(plus[..., None, None], self.F_plus, self.F_minus)

    def lower_bound(self) -> float:
        return segment_lower_bound(self.F_plus, self.F_minus)

    def to_dict(self) -> dict:
        return {"type": "piecewise", "F_minus": self.F_minus.tolist(), "a": self.a.tolist()}


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """User map ``y`` acting on (..., 3) arrays, with gradient and bi-Lipschitz constant."""

    func: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz_lower: float | None = None

    def apply(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x) -> np.ndarray:
        if self.grad is None:
            raise NotImplementedError("this map has no gradient")
        return np.asarray(self.grad(np.asarray(x, dtype=float)), dtype=float)

    def lower_bound(self) -> float:
        if self.lipschitz_lower is None:
            raise NonInvertibleDeformationError("smooth map needs a user-supplied lipschitz_lower")
        return float(self.lipschitz_lower)


Deformation = Affine | PiecewiseAffine | SmoothMap


def deformation_apply(d, x) -> np.ndarray:
    return d.apply(x)


def bilipschitz_lower_bound(d) -> float:
    lam = d.lower_bound()
    if not lam > INVERTIBILITY_TOL:
        raise NonInvertibleDeformationError(f"bi-Lipschitz constant {lam:.3g} is not positive")
    return lam


# -- Cauchy-Born ------------------------------------------------------------------

def lattice_vectors_in_range(potential: PairPotential, lattice: BravaisLattice,
                             lower_bound: float) -> np.ndarray:
    """Cartesian lattice vectors w != 0 that can interact once stretched by at least `lower_bound`."""
    coords = enumerate_ball(lattice, potential.cutoff / lower_bound)
    coords = coords[np.any(coords != 0, axis=1)]
    return lattice.to_cartesian(coords)


def cauchy_born_W(potential: PairPotential, F, lattice: BravaisLattice | None = None) -> float:
    """Stored energy per unit volume, ``(1 / 2|K|) sum_w Phi(F w)``."""
    lattice = lattice or integer_lattice()
    F = np.asarray(F, dtype=float)
    lam = smallest_singular_value(F)
    if lam <= INVERTIBILITY_TOL:
        raise NonInvertibleDeformationError("F is singular")
    w = lattice_vectors_in_range(potential, lattice, lam)
    return 0.5 * exact_sum(potential(w @ F.T)) / lattice.cell_volume
