"""Chevalley-Eilenberg cochains with exact coboundary matrices.

A k-cochain on a subalgebra ``h`` of ``g`` with values in a module ``M`` is
stored on strictly increasing k-tuples of ``h`` basis indices. Column keys of
the coboundary matrices are integers ``pos(S) * dim M + out``, so the sort
order of a key is the frozen monomial order (tuple first, output second).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .exact import Echelon, fraction_str, vec_axpy
from .lie_core import (
    BasisLabel,
    DeformationParams,
    StructureConstants,
    StructureError,
    build_deformed,
)

SparseRows = Dict[int, Dict[int, Fraction]]


# ---------------------------------------------------------------------------
# cochain spaces
# ---------------------------------------------------------------------------


class CochainSpace:
    """Basis bookkeeping for C^k(domain, M)."""

    def __init__(self, domain: Sequence[int], mdim: int, k: int):
        self.domain = tuple(domain)
        self.mdim = mdim
        self.k = k

    @cached_property
    def tuples(self) -> List[Tuple[int, ...]]:
        return list(itertools.combinations(range(len(self.domain)), self.k))

    @cached_property
    def pos(self) -> Dict[Tuple[int, ...], int]:
        return {t: i for i, t in enumerate(self.tuples)}

    @property
    def dim(self) -> int:
        return len(self.tuples) * self.mdim

    def key(self, local: Tuple[int, ...], out: int) -> int:
        return self.pos[local] * self.mdim + out

    def unkey(self, key: int) -> Tuple[Tuple[int, ...], int]:
        t, o = divmod(key, self.mdim)
        return self.tuples[t], o

    @property
    def keys(self) -> range:
        return range(self.dim)


def _sorted_with_sign(m: int, rest: Tuple[int, ...]) -> Tuple[Optional[Tuple[int, ...]], int]:
    """Sort ``(m,) + rest`` (rest increasing); sign of the permutation, or None if repeated."""
    if m in rest:
        return None, 0
    below = sum(1 for r in rest if r < m)
    s = tuple(r for r in rest if r < m) + (m,) + tuple(r for r in rest if r > m)
    return s, (-1) ** below


def ce_differential(
    bracket: Callable[[int, int], Mapping[int, object]],
    action: Callable[[int, int], Mapping[int, object]],
    ndomain: int,
    mdim: int,
    k: int,
) -> SparseRows:
    """Rows of d_k : C^k -> C^{k+1} for a Lie algebra of dimension ``ndomain``
    (local indices) acting on a module of dimension ``mdim``.

    (df)(t_0..t_k) = sum_i (-1)^i t_i.f(..^t_i..)
                   + sum_{i<j} (-1)^{i+j} f([t_i,t_j], ..^t_i..^t_j..)
    """
    src = CochainSpace(range(ndomain), mdim, k)
    dst = CochainSpace(range(ndomain), mdim, k + 1)
    rows: SparseRows = {}
    act_cache: Dict[Tuple[int, int], Mapping[int, object]] = {}

    def act(t, o):
        key = (t, o)
        if key not in act_cache:
            act_cache[key] = action(t, o)
        return act_cache[key]

    for T in dst.tuples:
        base = dst.pos[T] * mdim
        for i, t in enumerate(T):
            rest = T[:i] + T[i + 1:]
            sign = -1 if i % 2 else 1
            cbase = src.pos[rest] * mdim
            for o in range(mdim):
                for o2, c in act(t, o).items():
                    row = rows.setdefault(base + o2, {})
                    vec_axpy(row, sign, {cbase + o: c})
        for i, j in itertools.combinations(range(len(T)), 2):
            br = bracket(T[i], T[j])
            if not br:
                continue
            rest = T[:i] + T[i + 1:j] + T[j + 1:]
            sign = -1 if (i + j) % 2 else 1
            for m, c in br.items():
                S, sg = _sorted_with_sign(m, rest)
                if S is None:
                    continue
                cbase = src.pos[S] * mdim
                coef = sign * sg * c
                for o in range(mdim):
                    row = rows.setdefault(base + o, {})
                    vec_axpy(row, coef, {cbase + o: 1})
    return {r: v for r, v in rows.items() if v}


def _local_bracket(g: StructureConstants, h: Sequence[int]):
    loc = {a: i for i, a in enumerate(h)}

    def br(i, j):
        out = {}
        for c, v in g.bracket_basis(h[i], h[j]).items():
            if c not in loc:
                raise StructureError(f"{g.labels[h[i]]}, {g.labels[h[j]]} bracket leaves the subspace")
            out[loc[c]] = v
        return out

    return br


def _adjoint_action(g: StructureConstants, h: Sequence[int]):
    def act(i, o):
        return g.bracket_basis(h[i], o)

    return act


def resolve_labels(g: StructureConstants, labels: Iterable) -> Tuple[int, ...]:
    out = []
    for lab in labels:
        if isinstance(lab, int):
            out.append(lab)
        elif isinstance(lab, BasisLabel):
            out.append(g.index[lab])
        else:
            out.append(g.idx(lab))
    if len(set(out)) != len(out):
        raise StructureError("repeated labels")
    return tuple(sorted(out))


def is_subalgebra(g: StructureConstants, s: Sequence[int]) -> bool:
    ss = set(s)
    return all(set(g.bracket_basis(a, b)) <= ss for a, b in itertools.combinations(s, 2))


def is_ideal(g: StructureConstants, h: Sequence[int]) -> bool:
    hs = set(h)
    return all(set(g.bracket_basis(a, b)) <= hs for a in range(g.dim) for b in h)


def _require_ideal(g, h):
    if not is_ideal(g, h):
        raise StructureError("the given label subset is not an ideal")


# ---------------------------------------------------------------------------
# public types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoboundaryMatrix:
    """Sparse exact matrix of d_k with row/column index spaces."""

    rows: Mapping[int, Mapping[int, Fraction]]
    source: CochainSpace
    target: CochainSpace

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.target.dim, self.source.dim)

    def rank(self) -> int:
        ech = Echelon(reduced=False)
        for r in self.rows.values():
            ech.insert(r)
        return ech.rank

    def apply(self, vec: Mapping[int, object]) -> Dict[int, object]:
        out: Dict[int, object] = {}
        for r, row in self.rows.items():
            s = 0
            for c, v in row.items():
                x = vec.get(c)
                if x:
                    s = s + v * x
            if s:
                out[r] = s
        return out

    def columns(self) -> Dict[int, Dict[int, Fraction]]:
        cols: Dict[int, Dict[int, Fraction]] = {}
        for r, row in self.rows.items():
            for c, v in row.items():
                cols.setdefault(c, {})[r] = v
        return cols

    def compose_is_zero(self, before: "CoboundaryMatrix") -> bool:
        """True when ``self @ before`` vanishes exactly."""
        for col in before.columns().values():
            if self.apply(col):
                return False
        return True

    def to_dense(self) -> List[List[Fraction]]:
        m, k = self.shape
        out = [[Fraction(0)] * k for _ in range(m)]
        for r, row in self.rows.items():
            for c, v in row.items():
                out[r][c] = Fraction(v)
        return out


@dataclass(frozen=True)
class CochainMap:
    """Antisymmetric k-linear map from span(h) to g, sparse on increasing tuples."""

    algebra: StructureConstants
    h: Tuple[int, ...]
    k: int
    coeffs: Mapping[Tuple[Tuple[int, ...], int], Fraction]

    @property
    def space(self) -> CochainSpace:
        return CochainSpace(self.h, self.algebra.dim, self.k)

    def vector(self) -> Dict[int, Fraction]:
        sp = self.space
        loc = {a: i for i, a in enumerate(self.h)}
        return {
            sp.key(tuple(loc[a] for a in S), o): v for (S, o), v in self.coeffs.items() if v
        }

    @classmethod
    def from_vector(cls, g: StructureConstants, h: Sequence[int], k: int, vec: Mapping[int, object]):
        sp = CochainSpace(h, g.dim, k)
        coeffs = {}
        for key, v in vec.items():
            if v:
                t, o = sp.unkey(key)
                coeffs[(tuple(h[i] for i in t), o)] = v
        return cls(g, tuple(h), k, coeffs)

    @classmethod
    def from_labels(cls, g: StructureConstants, h, k: int, values: Mapping) -> "CochainMap":
        """``values`` maps a tuple of argument labels to ``{out_label: coeff}``."""
        hh = resolve_labels(g, h)
        coeffs: Dict[Tuple[Tuple[int, ...], int], Fraction] = {}
        for args, outs in values.items():
            idx = [g.idx(a) if not isinstance(a, int) else a for a in args]
            order = sorted(range(len(idx)), key=lambda t: idx[t])
            S = tuple(idx[t] for t in order)
            if len(set(S)) != len(S):
                continue
            sign = _perm_sign(order)
            for o, v in outs.items():
                oi = g.idx(o) if not isinstance(o, int) else o
                key = (S, oi)
                coeffs[key] = coeffs.get(key, 0) + sign * Fraction(v)
        return cls(g, hh, k, {key: v for key, v in coeffs.items() if v})

    def __call__(self, *args) -> Dict[int, Fraction]:
        """Evaluate on basis indices (or labels); antisymmetric by construction."""
        idx = [self.algebra.idx(a) if not isinstance(a, int) else a for a in args]
        if len(set(idx)) != len(idx):
            return {}
        order = sorted(range(len(idx)), key=lambda t: idx[t])
        S = tuple(idx[t] for t in order)
        sign = _perm_sign(order)
        return {o: sign * v for (T, o), v in self.coeffs.items() if T == S}

    def pretty(self) -> Dict[str, Dict[str, str]]:
        out: Dict[str, Dict[str, str]] = {}
        for (S, o), v in sorted(self.coeffs.items()):
            key = ",".join(str(self.algebra.labels[a]) for a in S)
            out.setdefault(key, {})[str(self.algebra.labels[o])] = fraction_str(v)
        return out


def _perm_sign(order: Sequence[int]) -> int:
    sign = 1
    seen = list(order)
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            if seen[i] > seen[j]:
                sign = -sign
    return sign


@dataclass
class CohomologyResult:
    degree: int
    dimension: int
    representatives: List[CochainMap] = field(default_factory=list)
    rank_in: int = 0
    rank_out: int = 0
    cochain_dim: int = 0

    def to_json(self) -> dict:
        reps = []
        for rep in self.representatives:
            reps.append(
                [
                    {"args": [int(a) for a in S], "out": int(o), "coeff": fraction_str(v)}
                    for (S, o), v in sorted(rep.coeffs.items())
                ]
            )
        return {
            "degree": self.degree,
            "dimension": self.dimension,
            "rank_in": self.rank_in,
            "rank_out": self.rank_out,
            "cochain_dim": self.cochain_dim,
            "representatives": reps,
        }


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def coboundary_matrix(g: StructureConstants, h, k: int) -> CoboundaryMatrix:
    """Matrix of d_k : C^k(h, g) -> C^{k+1}(h, g) with g an h-module via ad."""
    if k < 0:
        raise ValueError("degree must be >= 0")
    hh = resolve_labels(g, h)
    _require_ideal(g, hh)
    rows = ce_differential(_local_bracket(g, hh), _adjoint_action(g, hh), len(hh), g.dim, k)
    return CoboundaryMatrix(rows, CochainSpace(hh, g.dim, k), CochainSpace(hh, g.dim, k + 1))


def _cohomology(g: StructureConstants, h: Tuple[int, ...], k: int, with_reps: bool = True) -> CohomologyResult:
    d_in = coboundary_matrix(g, h, k - 1) if k >= 1 else None
    d_out = coboundary_matrix(g, h, k)
    ech = Echelon(reduced=True)
    for r in d_out.rows.values():
        ech.insert(r)
    rank_out = ech.rank
    space = d_out.source
    boundaries = list(d_in.columns().values()) if d_in is not None else []
    if not with_reps:
        rank_in = d_in.rank() if d_in is not None else 0
        return CohomologyResult(k, space.dim - rank_out - rank_in, [], rank_in, rank_out, space.dim)
    kernel = ech.nullspace(space.keys)
    bech = Echelon(reduced=True)
    for b in boundaries:
        bech.insert(b)
    rank_in = bech.rank
    new_pivots = []
    for v in kernel:
        r = bech.insert(v)
        if r is not None:
            new_pivots.append(min(r))
    reps = [CochainMap.from_vector(g, h, k, bech.rows[p]) for p in new_pivots]
    return CohomologyResult(k, len(reps), reps, rank_in, rank_out, space.dim)


def cohomology_dim(g: StructureConstants, k: int, with_reps: bool = True) -> CohomologyResult:
    """H^k(g, g) with adjoint coefficients, by brute-force exact elimination."""
    if k not in (1, 2, 3):
        raise ValueError("degree must be 1, 2 or 3")
    return _cohomology(g, tuple(range(g.dim)), k, with_reps)


def relative_cohomology(g: StructureConstants, h, k: int) -> CohomologyResult:
    """H^k(h, g) for an ideal h (no invariance imposed)."""
    return _cohomology(g, resolve_labels(g, h), k)


def cochain_action_rows(g: StructureConstants, h: Sequence[int], y: int, k: int) -> SparseRows:
    """Rows of f -> y.f on C^k(h, g):
    (y.f)(t_1..t_k) = [y, f(t)] - sum_i f(t_1..[y,t_i]..t_k)."""
    sp = CochainSpace(h, g.dim, k)
    loc = {a: i for i, a in enumerate(h)}
    rows: SparseRows = {}
    for T in sp.tuples:
        base = sp.pos[T] * g.dim
        for o in range(g.dim):
            for o2, c in g.bracket_basis(y, o).items():
                vec_axpy(rows.setdefault(base + o2, {}), c, {base + o: 1})
        for i, t in enumerate(T):
            for m, c in g.bracket_basis(y, h[t]).items():
                if m not in loc:
                    raise StructureError("h is not stable under the acting element")
                S, sg = _sorted_with_sign(loc[m], T[:i] + T[i + 1:])
                if S is None:
                    continue
                # argument order: replace position i; sign of moving it to front
                sg2 = sg * (-1) ** i
                cbase = sp.pos[S] * g.dim
                for o in range(g.dim):
                    vec_axpy(rows.setdefault(base + o, {}), -c * sg2, {cbase + o: 1})
    return {r: v for r, v in rows.items() if v}


def _check_decomposition(g, h, kp):
    if set(h) & set(kp) or len(h) + len(kp) != g.dim:
        raise StructureError("h and k_part are not complementary")
    _require_ideal(g, h)
    if not is_subalgebra(g, kp):
        raise StructureError("k_part is not a subalgebra")


def invariance_defect(f: CochainMap, y) -> Dict[int, Fraction]:
    """Vector of y.f in C^k(h, g)."""
    g = f.algebra
    yi = g.idx(y) if not isinstance(y, int) else y
    rows = cochain_action_rows(g, f.h, yi, f.k)
    vec = f.vector()
    out = {}
    for r, row in rows.items():
        s = sum((v * vec[c] for c, v in row.items() if c in vec), Fraction(0))
        if s:
            out[r] = s
    return out


def is_coboundary(g: StructureConstants, h, vec: Mapping[int, object], k: int = 2) -> bool:
    """Exact membership of a C^k(h,g) vector in the image of d_{k-1}."""
    d = coboundary_matrix(g, h, k - 1)
    ech = Echelon(reduced=False)
    for col in d.columns().values():
        ech.insert(col)
    return ech.contains(vec)


def invariant_cocycles(g: StructureConstants, h, k_part) -> CohomologyResult:
    """H^2(h, g)^k: cocycles whose k-transforms are coboundaries, modulo coboundaries."""
    hh = resolve_labels(g, h)
    kk = resolve_labels(g, k_part)
    _check_decomposition(g, hh, kk)
    d1 = coboundary_matrix(g, hh, 1)
    d2 = coboundary_matrix(g, hh, 2)
    c1 = d1.source.dim
    # unknowns: f -> (0, key), l_y -> (1 + y, key)
    system = Echelon(reduced=True)
    for row in d2.rows.values():
        system.insert({(0, c): v for c, v in row.items()})
    d1cols = d1.rows
    for yi, y in enumerate(kk):
        act = cochain_action_rows(g, hh, y, 2)
        for r in set(act) | set(d1cols):
            eq = {(0, c): v for c, v in act.get(r, {}).items()}
            for c, v in d1cols.get(r, {}).items():
                eq[(1 + yi, c)] = -v
            system.insert(eq)
    columns = [(0, c) for c in range(d2.source.dim)] + [
        (1 + yi, c) for yi in range(len(kk)) for c in range(c1)
    ]
    kernel = system.nullspace(columns)
    projected = []
    for v in kernel:
        fpart = {c: x for (tag, c), x in v.items() if tag == 0}
        if fpart:
            projected.append(fpart)
    bech = Echelon(reduced=True)
    for col in d1.columns().values():
        bech.insert(col)
    rank_in = bech.rank
    new_pivots = []
    for v in sorted(projected, key=min):
        r = bech.insert(v)
        if r is not None:
            new_pivots.append(min(r))
    reps = [CochainMap.from_vector(g, hh, 2, bech.rows[p]) for p in new_pivots]
    return CohomologyResult(2, len(reps), reps, rank_in, d2.rank(), d2.source.dim)


def hochschild_serre_check(g: StructureConstants, h, k_part) -> dict:
    """Compare dim H^2(g,g) with dim H^2(h,g)^k, both computed independently."""
    full = cohomology_dim(g, 2, with_reps=False).dimension
    inv = invariant_cocycles(g, h, k_part).dimension
    return {"dim_H2_g_g": full, "dim_H2_h_g_inv": inv, "equal": full == inv}


def class_span_equal(g: StructureConstants, h, first: Sequence[CochainMap], second: Sequence[CochainMap]) -> bool:
    """True when two families span the same subspace of H^2(h, g) (exact rank test)."""
    hh = resolve_labels(g, h)
    d1 = coboundary_matrix(g, hh, 1)
    bnd = list(d1.columns().values())

    def rank_of(vectors):
        ech = Echelon(reduced=False)
        for b in bnd:
            ech.insert(b)
        for v in vectors:
            ech.insert(v)
        return ech.rank

    a = [f.vector() for f in first]
    b = [f.vector() for f in second]
    r = rank_of([])
    return rank_of(a) == rank_of(b) == rank_of(a + b) and rank_of(a) - r == len(a) == len(b)


def quotient_rank(g: StructureConstants, h, family: Sequence[CochainMap]) -> int:
    """Rank of a family of cochains in C^2(h,g) / B^2(h,g)."""
    hh = resolve_labels(g, h)
    d1 = coboundary_matrix(g, hh, 1)
    ech = Echelon(reduced=False)
    for b in d1.columns().values():
        ech.insert(b)
    base = ech.rank
    for f in family:
        ech.insert(f.vector())
    return ech.rank - base


# ---------------------------------------------------------------------------
# the cocycles f1, f2, f3
# ---------------------------------------------------------------------------


def heisenberg_ideal(n: int) -> List[str]:
    return [f"x{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)] + ["I"]


def orthogonal_part(n: int) -> List[str]:
    return [f"l{i}{'' if j < 10 else ','}{j}" for i, j in itertools.combinations(range(1, n + 1), 2)]


def printed_cocycles(g: StructureConstants, n: int) -> List[CochainMap]:
    """f1, f2, f3 exactly as displayed: l_ij-valued on x∧x, p∧p, x⊗p, zero elsewhere.

    ``g`` must contain labels x_i, p_i, l_ij (g_n or the centerless quotient).
    """
    h = [lab for lab in heisenberg_ideal(n) if BasisLabel.parse(lab) in g.index]
    fams = []
    for kind_a, kind_b in (("x", "x"), ("p", "p"), ("x", "p")):
        values = {}
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i == j or (kind_a == kind_b and i > j):
                    continue
                lab, s = BasisLabel.l(i, j)
                values[(f"{kind_a}{i}", f"{kind_b}{j}")] = {str(lab): s}
        fams.append(CochainMap.from_labels(g, h, 2, values))
    return fams


def deformation_cocycles(n: int) -> List[CochainMap]:
    """d/d eps_k of the bracket of g_n(eps) at eps = 0, restricted to h_n ∧ h_n.

    These are f1, f2, f3 together with their I-components, i.e. the
    infinitesimal deformations that the family integrates.
    """
    g0 = build_deformed(DeformationParams(n))
    h = resolve_labels(g0, heisenberg_ideal(n))
    out = []
    for axis in range(3):
        eps = [0, 0, 0]
        eps[axis] = 1
        g1 = build_deformed(DeformationParams.of(n, eps))
        coeffs = {}
        for a, b in itertools.combinations(h, 2):
            diff = dict(g1.bracket_basis(a, b))
            vec_axpy(diff, -1, g0.bracket_basis(a, b))
            for o, v in diff.items():
                coeffs[((a, b), o)] = v
        out.append(CochainMap(g0, h, 2, coeffs))
    return out


# ---------------------------------------------------------------------------
# cohomology of the symmetry part with coefficients in a module
# ---------------------------------------------------------------------------


def module_cohomology_dim(
    g: StructureConstants,
    k_part,
    representation: Mapping[int, Mapping[int, Mapping[int, object]]],
    mdim: int,
    degree: int,
) -> int:
    """dim H^degree(k, M) for a subalgebra k of g acting on M.

    ``representation[y]`` holds the sparse rows of rho(y) on M for each basis
    index y of k.
    """
    kk = resolve_labels(g, k_part)
    if not is_subalgebra(g, kk):
        raise StructureError("k_part is not a subalgebra")
    cols = {}
    for y in kk:
        cy: Dict[int, Dict[int, object]] = {}
        for r, row in representation[y].items():
            for c, v in row.items():
                cy.setdefault(c, {})[r] = v
        cols[y] = cy

    def act(i, o):
        return cols[kk[i]].get(o, {})

    br = _local_bracket(g, kk)

    def rank_of(k):
        if k < 0:
            return 0
        rows = ce_differential(br, act, len(kk), mdim, k)
        ech = Echelon(reduced=False)
        for r in rows.values():
            ech.insert(r)
        return ech.rank

    dim_c = CochainSpace(kk, mdim, degree).dim
    return dim_c - rank_of(degree) - rank_of(degree - 1)


def whitehead_check(g: StructureConstants, h, k_part, modules=("adjoint", "C1"), degrees=(1, 2)) -> dict:
    """H^p(k, M) for M = g (adjoint) and M = C^q(h, g); all zero when k is semisimple."""
    hh = resolve_labels(g, h)
    kk = resolve_labels(g, k_part)
    report = {}
    for name in modules:
        if name == "adjoint":
            rep = {y: _ad_rows(g, y) for y in kk}
            mdim = g.dim
        elif name in ("C1", "C2"):
            q = int(name[1])
            rep = {y: cochain_action_rows(g, hh, y, q) for y in kk}
            mdim = CochainSpace(hh, g.dim, q).dim
        else:
            raise ValueError(f"unknown module {name!r}")
        for p in degrees:
            report[f"H{p}(k,{name})"] = module_cohomology_dim(g, kk, rep, mdim, p)
    return report


def _ad_rows(g: StructureConstants, y: int) -> Dict[int, Dict[int, object]]:
    rows: Dict[int, Dict[int, object]] = {}
    for o in range(g.dim):
        for r, v in g.bracket_basis(y, o).items():
            rows.setdefault(r, {})[o] = v
    return rows
