"""Oriented 2-planes in R^{n+2} and their Plücker coordinates.

Bivector coordinates use the g_n basis order, with the aliases
``x_i = l_{i,n+1}``, ``p_i = l_{i,n+2}`` and ``I = l_{n+1,n+2}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lie_core import DeformationParams, ParameterError, wedge_labels, g_labels
from .orbit_mech import DualPoint, derived_casimir, quadratic_values


class OutsideChartError(ParameterError):
    """The plane meets the locus I = 0, where the chart is undefined."""


class NotDecomposableError(ParameterError):
    """Bivector coordinates violate the Plücker relations."""


def _pair_positions(n: int):
    """(a, b) 0-based with a < b  ->  position in the g_n basis order."""
    pos = {lab: k for k, lab in enumerate(g_labels(n))}
    return {(a - 1, b - 1): pos[lab] for (a, b), lab in wedge_labels(n).items()}


@dataclass(frozen=True)
class OrientedPlane:
    """Plane spanned by ``u`` then ``v``; the order fixes the orientation."""

    u: tuple
    v: tuple

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1 or u.size < 3:
            raise ParameterError("spanning vectors must be two vectors of equal length >= 3")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ParameterError("spanning vectors must be finite")
        scale = np.linalg.norm(u) * np.linalg.norm(v)
        wedge = np.outer(u, v) - np.outer(v, u)
        if scale == 0 or np.linalg.norm(wedge) <= 1e-12 * scale:
            raise ParameterError("spanning vectors are linearly dependent")
        object.__setattr__(self, "u", tuple(u))
        object.__setattr__(self, "v", tuple(v))

    @property
    def n(self) -> int:
        return len(self.u) - 2

    def flipped(self) -> "OrientedPlane":
        return OrientedPlane(self.v, self.u)

    def rows(self) -> np.ndarray:
        return np.array([self.u, self.v])

    def same_oriented_subspace(self, other: "OrientedPlane", tol: float = 1e-10) -> bool:
        a = plucker(self).values
        b = plucker(other).values
        a = a / np.linalg.norm(a)
        b = b / np.linalg.norm(b)
        return bool(np.max(np.abs(a - b)) <= tol)


@dataclass
class BivectorCoords:
    n: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        dim = (self.n + 2) * (self.n + 1) // 2
        if self.values.shape != (dim,):
            raise ParameterError(f"need {dim} bivector coordinates")

    def matrix(self) -> np.ndarray:
        m = self.n + 2
        L = np.zeros((m, m))
        for (a, b), k in _pair_positions(self.n).items():
            L[a, b] = self.values[k]
            L[b, a] = -self.values[k]
        return L

    @classmethod
    def from_matrix(cls, L: np.ndarray) -> "BivectorCoords":
        n = L.shape[0] - 2
        vals = np.zeros((n + 2) * (n + 1) // 2)
        for (a, b), k in _pair_positions(n).items():
            vals[k] = L[a, b]
        return cls(n, vals)

    def l(self, a: int, b: int) -> float:
        """Coordinate l_ab with 1-based indices, antisymmetric."""
        return float(self.matrix()[a - 1, b - 1])

    @property
    def I(self) -> float:
        return float(self.values[-1])

    def as_dual_point(self, params: DeformationParams) -> DualPoint:
        if params.n != self.n:
            raise ParameterError("n mismatch")
        return DualPoint(params, self.values.copy())

    @classmethod
    def from_dual_point(cls, point: DualPoint) -> "BivectorCoords":
        return cls(point.params.n, point.coords.copy())


def plucker(plane: OrientedPlane, normalize: bool = False, tol: float = 1e-12) -> BivectorCoords:
    """l_ab = u_a v_b - u_b v_a; with ``normalize`` rescale u so that I = ±1."""
    u = np.array(plane.u)
    v = np.array(plane.v)
    m = u.size
    if normalize:
        I = u[m - 2] * v[m - 1] - u[m - 1] * v[m - 2]
        if abs(I) <= tol * np.linalg.norm(u) * np.linalg.norm(v):
            raise OutsideChartError("plane lies in the zero locus of I; cannot normalize")
        u = u / abs(I)
    L = np.outer(u, v) - np.outer(v, u)
    return BivectorCoords.from_matrix(L)


def plucker_residuals(b: BivectorCoords) -> float:
    """Max |l_ab l_cd - l_ac l_bd + l_ad l_bc| over a < b < c < d."""
    L = b.matrix()
    worst = 0.0
    for a, c1, c2, d in itertools.combinations(range(b.n + 2), 4):
        r = abs(L[a, c1] * L[c2, d] - L[a, c2] * L[c1, d] + L[a, d] * L[c1, c2])
        worst = max(worst, r)
    return worst


def point_to_plane(b: BivectorCoords, tol: float = 1e-10) -> OrientedPlane:
    """Oriented plane with Plücker coordinates exactly ``b`` (up to rounding).

    Uses the rows a, b of the coordinate matrix at the largest |l_ab|:
    row_a ∧ row_b = l_ab (u ∧ v) for a decomposable u ∧ v.
    """
    L = b.matrix()
    scale = float(np.max(np.abs(L)))
    if scale == 0.0:
        raise NotDecomposableError("zero bivector")
    if abs(b.I) <= tol * scale:
        raise OutsideChartError("I = 0: point lies outside the chart")
    res = plucker_residuals(b)
    if res > tol * max(1.0, scale * scale):
        raise NotDecomposableError(f"Plücker residual {res:.3e} exceeds tolerance")
    a, c = np.unravel_index(np.argmax(np.abs(np.triu(L, 1))), L.shape)
    return OrientedPlane(tuple(L[a] / L[a, c]), tuple(L[c]))


def plane_to_orbit_point(plane: OrientedPlane, params: DeformationParams, level: float = 1.0) -> DualPoint:
    """Orbit point of g_n(eps)^∨ at Casimir level ``level``² through the plane.

    Decomposable coordinates satisfy the angular and auxiliary relations for
    every eps; scaling u fixes the Casimir value.
    """
    if params.n != plane.n:
        raise ParameterError("n mismatch")
    b = plucker(plane)
    K = float(quadratic_values(derived_casimir(params).poly, b.values.size, b.values[None, :])[0])
    if not K > 0:
        raise ParameterError(f"Casimir value {K} is not positive on this plane; no real rescaling")
    return DualPoint(params, b.values * (level / math.sqrt(K)))


def random_plane(n: int, rng: np.random.Generator, min_abs_I: Optional[float] = None) -> OrientedPlane:
    """Gaussian random plane; with ``min_abs_I`` resample until |I| of the
    unit-normalized bivector exceeds it."""
    while True:
        u, v = rng.standard_normal(n + 2), rng.standard_normal(n + 2)
        plane = OrientedPlane(tuple(u), tuple(v))
        if min_abs_I is None:
            return plane
        vals = plucker(plane).values
        if abs(vals[-1]) >= min_abs_I * np.linalg.norm(vals):
            return plane
