"""Lie-Poisson mechanics on g_n(eps)^∨: Casimirs, the special orbits, the
gnomonic chart on the family (0, eps2, 0), free motion and RK4 flows.

Dual coordinates share the frozen basis order of :mod:`lie_core`; the
Lie-Poisson bracket of two coordinates is ``{ξ_a, ξ_b} = Σ_c c_ab^c ξ_c``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .exact import Echelon, as_fraction, fraction_str, height, to_json_scalar
from .lie_core import (
    BasisLabel,
    DeformationParams,
    ParameterError,
    StructureConstants,
    build_deformed,
    g_labels,
)


class ChartDomainError(ParameterError):
    """Chart coordinates outside 1 + eps2 q^2 > 0, or a point with I = 0."""


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-10
    drift: float = 1e-8
    rank: float = 1e-9


DEFAULT_TOLERANCES = Tolerances()


# ---------------------------------------------------------------------------
# exact polynomials in the dual coordinates
# ---------------------------------------------------------------------------

Monomial = Tuple[int, ...]


class Poly:
    """Sparse polynomial; monomials are sorted tuples of variable indices."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, object]] = None):
        self.terms: Dict[Monomial, object] = {}
        for m, c in (terms or {}).items():
            if c:
                key = tuple(sorted(m))
                s = self.terms.get(key, 0) + c
                if s:
                    self.terms[key] = s
                else:
                    self.terms.pop(key, None)

    @classmethod
    def var(cls, i: int) -> "Poly":
        return cls({(i,): Fraction(1)})

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): c})

    def _lift(self, other) -> "Poly":
        return other if isinstance(other, Poly) else Poly.const(other)

    def __add__(self, other):
        out = dict(self.terms)
        for m, c in self._lift(other).terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly({m: c * other for m, c in self.terms.items()})
        out: Dict[Monomial, object] = {}
        for (m1, c1), (m2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            key = tuple(sorted(m1 + m2))
            out[key] = out.get(key, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def derivative(self, i: int) -> "Poly":
        out: Dict[Monomial, object] = {}
        for m, c in self.terms.items():
            k = m.count(i)
            if k:
                rest = list(m)
                rest.remove(i)
                key = tuple(rest)
                out[key] = out.get(key, 0) + k * c
        return Poly(out)

    def variables(self) -> set:
        return {i for m in self.terms for i in m}

    def evaluate(self, point: Sequence):
        total = 0
        for m, c in self.terms.items():
            v = c
            for i in m:
                v = v * point[i]
            total = total + v
        return total

    def max_height(self) -> Fraction:
        return max((height(c) for c in self.terms.values()), default=Fraction(0))

    def quadratic_parts(self, dim: int) -> Tuple[np.ndarray, np.ndarray, float]:
        """``(Q, g, c)`` with ``P(ξ) = ½ ξᵀQξ + gᵀξ + c`` (degree <= 2 only)."""
        if self.degree > 2:
            raise ValueError("quadratic_parts needs degree <= 2")
        Q = np.zeros((dim, dim))
        g = np.zeros(dim)
        c = 0.0
        for m, v in self.terms.items():
            v = float(v)
            if len(m) == 0:
                c += v
            elif len(m) == 1:
                g[m[0]] += v
            elif m[0] == m[1]:
                Q[m[0], m[0]] += 2 * v
            else:
                Q[m[0], m[1]] += v
                Q[m[1], m[0]] += v
        return Q, g, c

    def __repr__(self):
        return f"Poly({self.terms!r})"


def coordinate(A: StructureConstants, label: Union[str, BasisLabel]) -> Poly:
    return Poly.var(A.idx(label))


def lie_poisson_poly(A: StructureConstants, F: Poly, G: Poly) -> Poly:
    """Exact ``{F, G} = Σ c_ab^c ξ_c ∂_aF ∂_bG``."""
    dF = {a: F.derivative(a) for a in F.variables()}
    dG = {b: G.derivative(b) for b in G.variables()}
    out = Poly()
    for a, b, vec in A.nonzero_pairs():
        if a in dF and b in dG:
            lin = Poly({(c,): v for c, v in vec.items()})
            out = out + dF[a] * dG[b] * lin
    return out


def poisson_matrix(A: StructureConstants, point) -> np.ndarray:
    """``Π_ab(ξ) = Σ_c c_ab^c ξ_c`` as a float matrix."""
    xi = np.asarray(point, dtype=float)
    return np.tensordot(A.tensor, xi, axes=([2], [0]))


def _num_gradient(F: Callable, point: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(point)
    for i in range(point.size):
        e = np.zeros_like(point)
        step = h * max(1.0, abs(point[i]))
        e[i] = step
        g[i] = (F(point + e) - F(point - e)) / (2 * step)
    return g


def lie_poisson_bracket(A: StructureConstants, F, G, point):
    """``{F, G}`` at a point.

    Polynomial arguments are differentiated exactly (an exact point gives an
    exact value); callables are differentiated by central differences.
    """
    if isinstance(F, Poly) and isinstance(G, Poly):
        total = 0
        dF = {a: F.derivative(a).evaluate(point) for a in F.variables()}
        dG = {b: G.derivative(b).evaluate(point) for b in G.variables()}
        for a, b, vec in A.nonzero_pairs():
            fa, gb = dF.get(a, 0), dG.get(b, 0)
            if fa and gb:
                total = total + fa * gb * sum(v * point[c] for c, v in vec.items())
        return total
    xi = np.asarray(point, dtype=float)

    def grad(H):
        if isinstance(H, Poly):
            return np.array([float(H.derivative(a).evaluate(xi)) for a in range(xi.size)])
        return _num_gradient(H, xi)

    return float(grad(F) @ poisson_matrix(A, xi) @ grad(G))


# ---------------------------------------------------------------------------
# Casimirs
# ---------------------------------------------------------------------------


class _Layout:
    """Index bookkeeping for g_n coordinates."""

    def __init__(self, n: int):
        self.n = n
        self.labels = g_labels(n)
        idx = {lab: k for k, lab in enumerate(self.labels)}
        self.dim = len(self.labels)
        self.L = {(i, j): idx[BasisLabel("L", i, j)] for i, j in itertools.combinations(range(1, n + 1), 2)}
        self.X = [idx[BasisLabel("X", i)] for i in range(1, n + 1)]
        self.P = [idx[BasisLabel("P", i)] for i in range(1, n + 1)]
        self.I = idx[BasisLabel("I")]

    def l(self, i: int, j: int):
        """``(index, sign)`` of l_ij for any i != j."""
        return (self.L[(i, j)], 1) if i < j else (self.L[(j, i)], -1)


GROUPS = ("I2", "x2", "p2", "xp", "l2")


def invariant_quadratic(n: int, I2=0, x2=0, p2=0, xp=0, l2=0) -> Poly:
    """``I2·I² + x2·x² + p2·p² + xp·(x·p) + l2·l²`` with o(n)-invariant squares."""
    lay = _Layout(n)
    terms: Dict[Monomial, object] = {}
    if I2:
        terms[(lay.I, lay.I)] = I2
    for a, b in zip(lay.X, lay.P):
        if x2:
            terms[(a, a)] = x2
        if p2:
            terms[(b, b)] = p2
        if xp:
            terms[tuple(sorted((a, b)))] = xp
    if l2:
        for k in lay.L.values():
            terms[(k, k)] = l2
    return Poly(terms)


@dataclass
class CasimirQuadratic:
    n: int
    poly: Poly
    name: str = "K"

    def evaluate(self, point):
        return self.poly.evaluate(point)

    def centrality_residual(self, A: StructureConstants) -> Fraction:
        """Largest coefficient of {K, ξ_a} over all coordinates (exact)."""
        worst = Fraction(0)
        for a in range(A.dim):
            worst = max(worst, lie_poisson_poly(A, self.poly, Poly.var(a)).max_height())
        return worst

    def grouped(self) -> Optional[Dict[str, object]]:
        """Coefficients on (I², x², p², x·p, l²) if the polynomial has that form."""
        lay = _Layout(self.n)
        t = self.poly.terms
        g = {
            "I2": t.get((lay.I, lay.I), Fraction(0)),
            "x2": t.get((lay.X[0], lay.X[0]), Fraction(0)),
            "p2": t.get((lay.P[0], lay.P[0]), Fraction(0)),
            "xp": t.get(tuple(sorted((lay.X[0], lay.P[0]))), Fraction(0)),
            "l2": t.get((next(iter(lay.L.values())),) * 2, Fraction(0)) if lay.L else Fraction(0),
        }
        return g if invariant_quadratic(self.n, **g) == self.poly else None

    def normalized(self) -> "CasimirQuadratic":
        """Scale so the I² coefficient (else the first coefficient) is 1."""
        lay = _Layout(self.n)
        lead = self.poly.terms.get((lay.I, lay.I)) or self.poly.terms[min(self.poly.terms)]
        return CasimirQuadratic(self.n, self.poly * (1 / lead), self.name)

    def pretty(self) -> str:
        g = self.grouped()
        labels = g_labels(self.n)
        if g is None:
            parts = [f"{fraction_str(c)}*" + "*".join(str(labels[i]) for i in m) for m, c in sorted(self.poly.terms.items())]
            return " + ".join(parts)
        names = {"I2": "I^2", "x2": "x^2", "p2": "p^2", "xp": "xp", "l2": "l^2"}
        return " + ".join(f"{fraction_str(g[k])}*{names[k]}" for k in GROUPS if g[k])

    def to_json(self) -> dict:
        g = self.grouped()
        labels = g_labels(self.n)
        return {
            "name": self.name,
            "grouped": {k: to_json_scalar(v) for k, v in g.items()} if g is not None else None,
            "terms": [
                {"monomial": [str(labels[i]) for i in m], "coeff": to_json_scalar(c)}
                for m, c in sorted(self.poly.terms.items())
            ],
        }


def quadratic_casimirs(params: DeformationParams, A: Optional[StructureConstants] = None) -> List[CasimirQuadratic]:
    """Basis of the homogeneous quadratic polynomials central for the Lie-Poisson bracket.

    Solves the linear centrality system exactly; returned elements are
    normalized (I² coefficient 1 when present).
    """
    A = A if A is not None else build_deformed(params)
    dim = A.dim
    unknowns = [(i, j) for i in range(dim) for j in range(i, dim)]
    rows: Dict[Tuple[int, Monomial], Dict[Monomial, object]] = {}
    # {ξ_iξ_j, ξ_e} = ξ_j Π_ie + ξ_i Π_je
    for (i, j) in unknowns:
        for src, other in ((i, j), (j, i)) if i != j else ((i, i),):
            mult = 2 if i == j else 1
            for e in range(dim):
                for c, v in A.bracket_basis(src, e).items():
                    key = (e, tuple(sorted((other, c))))
                    row = rows.setdefault(key, {})
                    s = row.get((i, j), 0) + mult * v
                    if s:
                        row[(i, j)] = s
                    else:
                        row.pop((i, j), None)
    ech = Echelon(reduced=True)
    for row in rows.values():
        if row:
            ech.insert(row)
    out = []
    for k, vec in enumerate(ech.nullspace(unknowns)):
        cas = CasimirQuadratic(params.n, Poly(vec), name=f"C{k + 1}")
        out.append(cas.normalized())
    return out


def derived_casimir(params: DeformationParams) -> CasimirQuadratic:
    """I² + eps2 x² + eps1 p² - 2 eps3 x·p + (eps1 eps2 - eps3²) l²."""
    e1, e2, e3 = params.eps
    poly = invariant_quadratic(params.n, I2=Fraction(1), x2=e2, p2=e1, xp=-2 * e3, l2=e1 * e2 - e3 * e3)
    return CasimirQuadratic(params.n, poly, name="K")


def printed_casimir(params: DeformationParams) -> CasimirQuadratic:
    """The quadratic exactly as printed (eps1 on x², eps2 on p²)."""
    e1, e2, e3 = params.eps
    poly = invariant_quadratic(params.n, I2=Fraction(1), x2=e1, p2=e2, xp=-2 * e3, l2=e1 * e2 - e3 * e3)
    return CasimirQuadratic(params.n, poly, name="K_printed")


def casimir_comparison(params: DeformationParams) -> dict:
    """WARN-level report: derived central quadratic versus the printed one."""
    A = build_deformed(params)
    derived, printed = derived_casimir(params), printed_casimir(params)
    d_res, p_res = derived.centrality_residual(A), printed.centrality_residual(A)
    agree = derived.poly == printed.poly
    return {
        "eps": [fraction_str(e) for e in params.eps],
        "derived": derived.pretty(),
        "printed": printed.pretty(),
        "derived_centrality_residual": fraction_str(d_res),
        "printed_centrality_residual": fraction_str(p_res),
        "status": "PASS" if agree or p_res == 0 else "WARN",
        "note": None if agree or p_res == 0 else "printed x^2 and p^2 coefficients are swapped relative to the central quadratic",
    }


# ---------------------------------------------------------------------------
# points, orbits and residuals
# ---------------------------------------------------------------------------


@dataclass
class DualPoint:
    params: DeformationParams
    coords: np.ndarray

    def __post_init__(self):
        lay = _Layout(self.params.n)
        arr = np.asarray(self.coords, dtype=float)
        if arr.shape != (lay.dim,):
            raise ParameterError(f"point needs {lay.dim} coordinates, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("point has non-finite entries")
        self.coords = arr

    @classmethod
    def from_parts(cls, params: DeformationParams, I=0.0, x=None, p=None, l=None) -> "DualPoint":
        """``l`` may be an antisymmetric n×n array or a dict {(i, j): value}."""
        n = params.n
        lay = _Layout(n)
        c = np.zeros(lay.dim)
        c[lay.I] = I
        if x is not None:
            c[lay.X] = x
        if p is not None:
            c[lay.P] = p
        if l is not None:
            if isinstance(l, Mapping):
                for (i, j), v in l.items():
                    k, s = lay.l(i, j)
                    c[k] = s * v
            else:
                m = np.asarray(l, dtype=float)
                for (i, j), k in lay.L.items():
                    c[k] = m[i - 1, j - 1]
        return cls(params, c)

    @property
    def layout(self) -> _Layout:
        return _Layout(self.params.n)

    @property
    def I(self) -> float:
        return float(self.coords[self.layout.I])

    @property
    def x(self) -> np.ndarray:
        return self.coords[self.layout.X]

    @property
    def p(self) -> np.ndarray:
        return self.coords[self.layout.P]

    @property
    def l_matrix(self) -> np.ndarray:
        n = self.params.n
        m = np.zeros((n, n))
        for (i, j), k in self.layout.L.items():
            m[i - 1, j - 1] = self.coords[k]
            m[j - 1, i - 1] = -self.coords[k]
        return m


@dataclass(frozen=True)
class OrbitSpec:
    params: DeformationParams
    level: float = 1.0
    casimir: Optional[CasimirQuadratic] = None

    def __post_init__(self):
        if not self.level > 0:
            raise ParameterError("orbit level must be positive")
        if self.casimir is None:
            object.__setattr__(self, "casimir", derived_casimir(self.params))


@dataclass
class OrbitResiduals:
    casimir: float
    angular: float
    plucker_aux: float

    def max(self) -> float:
        return max(abs(self.casimir), self.angular, self.plucker_aux)


def _angular_residuals(lay: _Layout, C: np.ndarray) -> np.ndarray:
    """|I l_ij - x_i p_j + x_j p_i| per row of a (N, dim) array, maximized over pairs."""
    if not lay.L:
        return np.zeros(C.shape[0])
    res = []
    for (i, j), k in lay.L.items():
        xi, xj = C[:, lay.X[i - 1]], C[:, lay.X[j - 1]]
        pi, pj = C[:, lay.P[i - 1]], C[:, lay.P[j - 1]]
        res.append(np.abs(C[:, lay.I] * C[:, k] - xi * pj + xj * pi))
    return np.max(res, axis=0)


def _aux_residuals(lay: _Layout, C: np.ndarray) -> np.ndarray:
    """Max over i<j<k of |l_ij v_k - l_ik v_j + l_jk v_i| for v = x and v = p."""
    if lay.n < 3:
        return np.zeros(C.shape[0])
    res = []
    for i, j, k in itertools.combinations(range(1, lay.n + 1), 3):
        lij, lik, ljk = C[:, lay.L[(i, j)]], C[:, lay.L[(i, k)]], C[:, lay.L[(j, k)]]
        for V in (lay.X, lay.P):
            res.append(np.abs(lij * C[:, V[k - 1]] - lik * C[:, V[j - 1]] + ljk * C[:, V[i - 1]]))
    return np.max(res, axis=0)


def quadratic_values(poly: Poly, dim: int, C: np.ndarray) -> np.ndarray:
    Q, g, c = poly.quadratic_parts(dim)
    return 0.5 * np.einsum("ni,ij,nj->n", C, Q, C) + C @ g + c


def orbit_residuals(spec: OrbitSpec, point: DualPoint) -> OrbitResiduals:
    if point.params.n != spec.params.n:
        raise ParameterError("point and orbit have different n")
    lay = point.layout
    C = point.coords[None, :]
    cas = float(quadratic_values(spec.casimir.poly, lay.dim, C)[0]) - spec.level ** 2
    return OrbitResiduals(cas, float(_angular_residuals(lay, C)[0]), float(_aux_residuals(lay, C)[0]))


# ---------------------------------------------------------------------------
# the gnomonic chart on (0, eps2, 0)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChartPoint:
    q: Tuple[float, ...]
    p: Tuple[float, ...]

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        p = tuple(float(v) for v in self.p)
        if len(q) != len(p) or not q:
            raise ParameterError("q and p must have the same positive length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return len(self.q)


def _chart_denominator(eps2, q: np.ndarray) -> float:
    D = 1.0 + float(eps2) * float(q @ q)
    if not D > 0:
        raise ChartDomainError(f"1 + eps2*q^2 = {D} is not positive")
    return D


def chart_params(n: int, eps2) -> DeformationParams:
    # floats are binary rationals, so converting them here loses nothing
    e2 = Fraction(eps2) if isinstance(eps2, float) else as_fraction(eps2)
    return DeformationParams(n, 0, e2, 0)


def chart_to_point(eps2, chart: ChartPoint, branch: int = 1, level: float = 1.0) -> DualPoint:
    """I = ±r/sqrt(1 + eps2 q²), x = I q, l_ij = q_i p_j - q_j p_i."""
    if branch not in (1, -1):
        raise ParameterError("branch must be +1 or -1")
    q, p = np.array(chart.q), np.array(chart.p)
    D = _chart_denominator(eps2, q)
    I = branch * level / math.sqrt(D)
    n = chart.n
    l = np.outer(q, p) - np.outer(p, q)
    return DualPoint.from_parts(chart_params(n, eps2), I=I, x=I * q, p=p, l=l)


def point_to_chart(point: DualPoint) -> ChartPoint:
    I = point.I
    if I == 0:
        raise ChartDomainError("I = 0 lies outside the chart")
    return ChartPoint(tuple(point.x / I), tuple(point.p))


def conjugate_momenta(eps2, chart: ChartPoint) -> np.ndarray:
    """Darboux momenta p_i - eps2 (q·p) q_i / (1 + eps2 q²)."""
    q, p = np.array(chart.q), np.array(chart.p)
    D = _chart_denominator(eps2, q)
    return p - float(eps2) * float(q @ p) * q / D


def liouville_form(eps2, chart: ChartPoint) -> np.ndarray:
    """θ as a covector on (q, p): dq-components are the conjugate momenta, dp-components 0."""
    return np.concatenate([conjugate_momenta(eps2, chart), np.zeros(chart.n)])


def symplectic_matrix(eps2, chart: ChartPoint) -> np.ndarray:
    """Ω with ω = -dθ = ½ Σ Ω_ab dz_a ∧ dz_b, z = (q, p)."""
    e = float(eps2)
    q, p = np.array(chart.q), np.array(chart.p)
    n = chart.n
    D = _chart_denominator(e, q)
    s = float(q @ p)
    # dθ_i/dq_j and dθ_i/dp_j
    dq = -e * ((np.outer(q, p) + s * np.eye(n)) / D - 2 * e * s * np.outer(q, q) / D ** 2)
    dp = np.eye(n) - e * np.outer(q, q) / D
    Om = np.zeros((2 * n, 2 * n))
    Om[:n, :n] = dq - dq.T
    Om[:n, n:] = dp
    Om[n:, :n] = -dp.T
    return Om


def chart_poisson_matrix(eps2, chart: ChartPoint, branch: int = 1) -> np.ndarray:
    """Brackets {z_a, z_b} of z = (q, p), q = x/I, from the Lie-Poisson structure."""
    point = chart_to_point(eps2, chart, branch)
    lay = point.layout
    A = build_deformed(point.params)
    Pi = poisson_matrix(A, point.coords)
    n = chart.n
    J = np.zeros((2 * n, lay.dim))
    I = point.I
    for i in range(n):
        J[i, lay.X[i]] = 1 / I
        J[i, lay.I] = -point.x[i] / I ** 2
        J[n + i, lay.P[i]] = 1.0
    return J @ Pi @ J.T


def canonical_chart_brackets(eps2, chart: ChartPoint) -> np.ndarray:
    """Closed form: {q_i,q_j} = 0, {q_i,p_j} = δ_ij + eps2 q_i q_j, {p_i,p_j} = eps2 l_ij."""
    e = float(eps2)
    q, p = np.array(chart.q), np.array(chart.p)
    n = chart.n
    out = np.zeros((2 * n, 2 * n))
    qp = np.eye(n) + e * np.outer(q, q)
    out[:n, n:] = qp
    out[n:, :n] = -qp.T
    out[n:, n:] = e * (np.outer(q, p) - np.outer(p, q))
    return out


# ---------------------------------------------------------------------------
# free motion and momentum maps
# ---------------------------------------------------------------------------


def free_hamiltonian_poly(params: DeformationParams) -> Poly:
    return invariant_quadratic(params.n, p2=Fraction(1, 2), l2=params.eps2 / 2)


def free_hamiltonian(params: DeformationParams, point) -> float:
    """½(p² + eps2 l²)."""
    coords = point.coords if isinstance(point, DualPoint) else point
    return free_hamiltonian_poly(params).evaluate(coords)


@dataclass
class MomentumValue:
    lam: np.ndarray
    mu0_l: np.ndarray
    mu0_p: np.ndarray
    eps2: float

    @property
    def norm_sq(self) -> float:
        """|μ₀|² = p² + eps2 l² (l² summed over i < j)."""
        return float(self.mu0_p @ self.mu0_p + self.eps2 * self.mu0_l @ self.mu0_l)


def momentum_maps(params: DeformationParams, point: DualPoint) -> MomentumValue:
    lay = point.layout
    l_vec = np.array([point.coords[k] for k in lay.L.values()])
    return MomentumValue(point.l_matrix, l_vec, point.p.copy(), float(params.eps2))


def poisson_rank(params: DeformationParams, point, rel_tol: float = DEFAULT_TOLERANCES.rank, A=None) -> int:
    A = A if A is not None else build_deformed(params)
    coords = point.coords if isinstance(point, DualPoint) else np.asarray(point, dtype=float)
    Pi = poisson_matrix(A, coords)
    s = np.linalg.svd(Pi, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    params: DeformationParams
    times: np.ndarray
    states: np.ndarray
    drift: Dict[str, float] = field(default_factory=dict)
    residual_growth: Dict[str, float] = field(default_factory=dict)
    hamiltonian: Optional[Poly] = None

    def __post_init__(self):
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ParameterError("time grid must be strictly increasing")

    def point(self, k: int) -> DualPoint:
        return DualPoint(self.params, self.states[k])

    def chart_q(self) -> np.ndarray:
        lay = _Layout(self.params.n)
        return self.states[:, lay.X] / self.states[:, [lay.I]]

    def to_csv(self, stream=None, every: int = 1) -> str:
        """Columns t, I, x_i, p_i, l_ij, H0, K, max_angular_residual."""
        lay = _Layout(self.params.n)
        n = self.params.n
        buf = stream if stream is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "I"] + [f"x_{i}" for i in range(1, n + 1)] + [f"p_{i}" for i in range(1, n + 1)]
        header += [f"l_{i}{j}" if j < 10 else f"l_{i},{j}" for (i, j) in lay.L] + ["H0", "K", "max_angular_residual"]
        w.writerow(header)
        sel = np.arange(0, len(self.times), max(1, int(every)))
        if sel[-1] != len(self.times) - 1:
            sel = np.append(sel, len(self.times) - 1)
        C = self.states[sel]
        H0 = quadratic_values(free_hamiltonian_poly(self.params), lay.dim, C)
        K = quadratic_values(derived_casimir(self.params).poly, lay.dim, C)
        ang = _angular_residuals(lay, C)
        cols = [lay.I] + lay.X + lay.P + list(lay.L.values())
        for r, k in enumerate(sel):
            row = [self.times[k]] + [C[r, c] for c in cols] + [H0[r], K[r], ang[r]]
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue() if stream is None else ""


def _rk4(f, y0: np.ndarray, dt: float, steps: int) -> np.ndarray:
    out = np.empty((steps + 1, y0.size))
    out[0] = y = y0.copy()
    for k in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = y
    return out


def hamiltonian_flow(
    params: DeformationParams,
    H: Optional[Poly],
    point0: DualPoint,
    T: float,
    dt: float,
) -> Trajectory:
    """Classical RK4 for ξ̇_a = {ξ_a, H} = Σ_b Π_ab(ξ) ∂_b H, no projection.

    ``H`` must be a polynomial of degree <= 2 (default: the free Hamiltonian).
    """
    if not dt > 0 or not T > 0:
        raise ParameterError("T and dt must be positive")
    A = build_deformed(params)
    H = H if H is not None else free_hamiltonian_poly(params)
    dim = A.dim
    Q, g, _ = H.quadratic_parts(dim)
    Tflat = A.tensor.reshape(dim * dim, dim)

    def f(y):
        Pi = (Tflat @ y).reshape(dim, dim)
        return Pi @ (Q @ y + g)

    steps = int(round(T / dt))
    states = _rk4(f, np.asarray(point0.coords, dtype=float), dt, steps)
    times = np.arange(steps + 1) * dt
    traj = Trajectory(params, times, states, hamiltonian=H)
    _fill_metrics(traj, A)
    return traj


def _fill_metrics(traj: Trajectory, A: StructureConstants) -> None:
    params, C = traj.params, traj.states
    dim = A.dim
    lay = _Layout(params.n)

    def drift(vals):
        return float(np.max(np.abs(vals - vals[0])))

    traj.drift["H"] = drift(quadratic_values(traj.hamiltonian, dim, C))
    traj.drift["K"] = drift(quadratic_values(derived_casimir(params).poly, dim, C))
    for cas in quadratic_casimirs(params, A):
        traj.drift[f"casimir:{cas.name}"] = drift(quadratic_values(cas.poly, dim, C))
    if params.eps1 == 0 and params.eps3 == 0:
        comps = [(f"mu0:{lab}", k) for lab, k in zip(("l%d%d" % ij for ij in lay.L), lay.L.values())]
        comps += [(f"mu0:p{i + 1}", k) for i, k in enumerate(lay.P)]
        for name, k in comps:
            traj.drift[name] = drift(C[:, k])
    ang, aux = _angular_residuals(lay, C), _aux_residuals(lay, C)
    traj.residual_growth["angular"] = float(np.max(ang) - ang[0])
    traj.residual_growth["plucker_aux"] = float(np.max(aux) - aux[0])
    traj.residual_growth["angular_max"] = float(np.max(ang))
    traj.residual_growth["plucker_aux_max"] = float(np.max(aux))


def homogeneous_collinearity(traj: Trajectory) -> float:
    """Max distance of (I, x)/|(I, x)| from the best-fitting 2-plane through 0.

    Gnomonic lines are exactly the images of such planes; working with the
    homogeneous vector stays finite where the chart value x/I blows up.
    """
    lay = _Layout(traj.params.n)
    Y = traj.states[:, [lay.I] + lay.X]
    Y = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    _, _, Vt = np.linalg.svd(Y, full_matrices=False)
    plane = Vt[:2]
    resid = Y - (Y @ plane.T) @ plane
    return float(np.max(np.linalg.norm(resid, axis=1)))


def affine_collinearity(traj: Trajectory, min_abs_I: float = 0.1) -> float:
    """Max distance of chart points q(t) (with |I| >= min_abs_I) from their best line."""
    lay = _Layout(traj.params.n)
    keep = np.abs(traj.states[:, lay.I]) >= min_abs_I
    q = traj.chart_q()[keep]
    if len(q) < 2:
        return 0.0
    centre = q.mean(axis=0)
    _, _, Vt = np.linalg.svd(q - centre, full_matrices=False)
    d = Vt[0]
    off = (q - centre) - np.outer((q - centre) @ d, d)
    return float(np.max(np.linalg.norm(off, axis=1)))


# ---------------------------------------------------------------------------
# degenerations
# ---------------------------------------------------------------------------


def i_branches(params: DeformationParams, point: DualPoint, level: float = 1.0) -> List[float]:
    """Values of I solving K = level² with the other coordinates of ``point`` fixed.

    K contains I only through I², so the solutions come in a ± pair.
    """
    lay = point.layout
    c = point.coords.copy()
    c[lay.I] = 0.0
    rest = float(quadratic_values(derived_casimir(params).poly, lay.dim, c[None, :])[0])
    rhs = level ** 2 - rest
    if rhs < 0:
        return []
    if rhs == 0:
        return [0.0]
    r = math.sqrt(rhs)
    return [-r, r]


@dataclass
class DegenerationReport:
    base_variables: str
    base_residual: float
    fiber_dim: int
    components: List[int]
    separated_by_I: bool

    def to_json(self) -> dict:
        return asdict(self)


def degeneration_structure(params: DeformationParams, points: Sequence[DualPoint], level: float = 1.0) -> DegenerationReport:
    """Base quadric, fiber dimension and I-sign components on the flat conic."""
    e1, e2, e3 = params.eps
    if e3 * e3 != e1 * e2:
        raise ParameterError("degeneration_structure needs eps3^2 = eps1*eps2")
    K = derived_casimir(params)
    lay = _Layout(params.n)
    used = K.poly.variables()
    if used <= set(lay.X) | {lay.I}:
        base, base_idx = "I,x", [lay.I] + lay.X
    elif used <= set(lay.P) | {lay.I}:
        base, base_idx = "I,p", [lay.I] + lay.P
    else:
        base, base_idx = "I,x,p", [lay.I] + lay.X + lay.P
    A = build_deformed(params)
    C = np.array([pt.coords for pt in points])
    base_res = float(np.max(np.abs(quadratic_values(K.poly, lay.dim, C) - level ** 2)))
    fibers = []
    for pt in points:
        Pi = poisson_matrix(A, pt.coords)
        total = poisson_rank(params, pt, A=A)
        proj = int(np.linalg.matrix_rank(Pi[base_idx, :], tol=DEFAULT_TOLERANCES.rank * max(1.0, np.abs(Pi).max())))
        fibers.append(total - proj)
    signs = sorted({int(np.sign(pt.I)) for pt in points})
    # I² = level² - (nonnegative-definite rest) forces |I| >= level when the
    # remaining quadratic is negative semidefinite
    g = K.grouped() or {}
    separated = all(g.get(k, 0) <= 0 for k in ("x2", "p2", "l2"))
    return DegenerationReport(base, base_res, max(fibers) if fibers else 0, signs, separated)


def flat_limit_defect(eps2, chart: ChartPoint) -> Tuple[float, float]:
    """(|I - 1|, max|l - x∧p|) at a chart point; both are O(eps2)."""
    pt = chart_to_point(eps2, chart)
    xp = np.outer(pt.x, pt.p) - np.outer(pt.p, pt.x)
    return abs(pt.I - 1.0), float(np.max(np.abs(pt.l_matrix - xp))) if chart.n > 1 else 0.0


def run_manifest(
    params: DeformationParams,
    point0: DualPoint,
    T: float,
    dt: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    seed: Optional[int] = None,
    extra: Optional[dict] = None,
) -> dict:
    out = {
        "params": {"n": params.n, "eps": [to_json_scalar(e) for e in params.eps]},
        "initial_point": [repr(float(v)) for v in point0.coords],
        "integrator": {"method": "rk4", "T": T, "dt": dt, "steps": int(round(T / dt)), "projection": False},
        "tolerances": asdict(tolerances),
        "seed": seed,
    }
    if extra:
        out.update(extra)
    return out
