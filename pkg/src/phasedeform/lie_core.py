"""Finite-dimensional Lie algebras given by exact structure constants.

Basis order for the algebras of the deformation family is frozen as
``(l_ij lexicographic, x_1..x_n, p_1..p_n, I)``. Every table stores
``[e_a, e_b] = sum_c coeff * e_c`` only for ``a < b``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exact import QuadraticNumber, as_fraction, fraction_str, height, vec_axpy


class ParameterError(ValueError):
    """Invalid numeric parameter (n, deformation triple, chart domain, ...)."""


class StructureError(ValueError):
    """A requested algebraic structure does not exist (not an ideal, ...)."""


KINDS = ("L", "X", "P", "I", "E")


@dataclass(frozen=True, order=True)
class BasisLabel:
    """Basis vector name: ``L(i,j)`` with i<j, ``X(i)``, ``P(i)``, ``I`` or ``E(i)``."""

    kind: str
    i: int = 0
    j: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown label kind {self.kind!r}")
        if self.kind == "L" and not (1 <= self.i < self.j):
            raise ParameterError(f"L({self.i},{self.j}) needs 1 <= i < j")
        if self.kind in ("X", "P", "E") and (self.i < 1 or self.j != 0):
            raise ParameterError(f"{self.kind}({self.i}) needs index >= 1")
        if self.kind == "I" and (self.i or self.j):
            raise ParameterError("I takes no index")

    @classmethod
    def l(cls, i: int, j: int) -> Tuple["BasisLabel", int]:
        """``L(i,j)`` normalized to increasing order, with the sign of the swap."""
        if i == j:
            raise ParameterError("L(i,i) is zero")
        if i < j:
            return cls("L", i, j), 1
        return cls("L", j, i), -1

    def __str__(self):
        if self.kind == "L":
            sep = "" if self.j < 10 else ","
            return f"l{self.i}{sep}{self.j}"
        if self.kind == "I":
            return "I"
        return f"{self.kind.lower()}{self.i}"

    @classmethod
    def parse(cls, text: str) -> "BasisLabel":
        text = text.strip()
        if text == "I":
            return cls("I")
        head, rest = text[0], text[1:]
        if head == "l":
            if "," in rest:
                i, j = rest.split(",")
            else:
                i, j = rest[:-1], rest[-1]
            return cls("L", int(i), int(j))
        return cls(head.upper(), int(rest))


def _l_labels(m: int) -> List[BasisLabel]:
    return [BasisLabel("L", i, j) for i, j in itertools.combinations(range(1, m + 1), 2)]


def g_labels(n: int) -> List[BasisLabel]:
    """Frozen basis of g_n: l_ij, x_i, p_i, I."""
    return (
        _l_labels(n)
        + [BasisLabel("X", i) for i in range(1, n + 1)]
        + [BasisLabel("P", i) for i in range(1, n + 1)]
        + [BasisLabel("I")]
    )


class StructureConstants:
    """Sparse exact bracket table of a Lie algebra (or candidate Lie algebra).

    ``table`` maps ``(a, b)`` with ``a < b`` to a tuple of ``(c, coeff)``.
    Instances are treated as immutable.
    """

    def __init__(
        self,
        labels: Sequence[BasisLabel],
        table: Mapping[Tuple[int, int], Iterable[Tuple[int, object]]],
        n: Optional[int] = None,
        name: str = "",
    ):
        self.labels: Tuple[BasisLabel, ...] = tuple(labels)
        self.dim = len(self.labels)
        if self.dim == 0:
            raise ParameterError("empty algebra")
        if len(set(self.labels)) != self.dim:
            raise ParameterError("duplicate basis labels")
        clean: Dict[Tuple[int, int], Tuple[Tuple[int, object], ...]] = {}
        for (a, b), terms in table.items():
            if not (0 <= a < b < self.dim):
                raise ParameterError(f"bad bracket key {(a, b)}")
            acc: Dict[int, object] = {}
            for c, coeff in terms:
                if not 0 <= c < self.dim:
                    raise ParameterError(f"bad output index {c}")
                vec_axpy(acc, 1, {c: coeff})
            if acc:
                clean[(a, b)] = tuple(sorted(acc.items()))
        self.table = clean
        self.n = n
        self.name = name

    # -- lookup -------------------------------------------------------------

    @cached_property
    def index(self) -> Dict[BasisLabel, int]:
        return {lab: k for k, lab in enumerate(self.labels)}

    def idx(self, label) -> int:
        if isinstance(label, str):
            label = BasisLabel.parse(label)
        return self.index[label]

    def bracket_basis(self, a: int, b: int) -> Dict[int, object]:
        """``[e_a, e_b]`` as a sparse dict, antisymmetry applied."""
        if a == b:
            return {}
        if a < b:
            return dict(self.table.get((a, b), ()))
        return {c: -v for c, v in self.table.get((b, a), ())}

    @cached_property
    def _full(self) -> Dict[Tuple[int, int], Dict[int, object]]:
        out = {}
        for (a, b), terms in self.table.items():
            out[(a, b)] = dict(terms)
            out[(b, a)] = {c: -v for c, v in terms}
        return out

    def nonzero_pairs(self):
        """Iterate ``(a, b, {c: coeff})`` over all ordered pairs with nonzero bracket."""
        for (a, b), vec in self._full.items():
            yield a, b, vec

    def coeff(self, a: int, b: int, c: int):
        return self._full.get((a, b), {}).get(c, 0)

    def bracket_label(self, u: str, v: str) -> Dict[str, object]:
        """Bracket of two basis labels given as strings, e.g. ``("x1", "p1")``."""
        vec = self.bracket_basis(self.idx(u), self.idx(v))
        return {str(self.labels[c]): val for c, val in vec.items()}

    # -- dense views (floats) -----------------------------------------------

    @cached_property
    def tensor(self) -> np.ndarray:
        """Float array ``T[a, b, c] = c_ab^c``."""
        t = np.zeros((self.dim, self.dim, self.dim))
        for (a, b), vec in self._full.items():
            for c, v in vec.items():
                t[a, b, c] = float(v)
        return t

    def ad_matrices(self) -> np.ndarray:
        """``ad[a][c, b] = c_ab^c`` (matrix of ad_{e_a})."""
        return np.transpose(self.tensor, (0, 2, 1))

    # -- comparison / serialization ------------------------------------------

    def same_table(self, other: "StructureConstants") -> bool:
        return self.labels == other.labels and self.table == other.table

    def relabeled(self, labels: Sequence[BasisLabel]) -> "StructureConstants":
        return StructureConstants(labels, self.table, n=self.n, name=self.name)

    def to_json(self) -> dict:
        brackets = []
        for (a, b) in sorted(self.table):
            terms = [{"c": c, "coeff": fraction_str(v)} for c, v in self.table[(a, b)]]
            brackets.append({"a": a, "b": b, "terms": terms})
        return {
            "n": self.n,
            "dim": self.dim,
            "labels": [str(lab) for lab in self.labels],
            "brackets": brackets,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, doc: Mapping) -> "StructureConstants":
        labels = [BasisLabel.parse(s) for s in doc["labels"]]
        if len(labels) != doc["dim"]:
            raise ParameterError("dim does not match labels")
        table = {}
        for br in doc["brackets"]:
            table[(br["a"], br["b"])] = [(t["c"], as_fraction(t["coeff"])) for t in br["terms"]]
        return cls(labels, table, n=doc.get("n"))

    def __repr__(self):
        return f"StructureConstants({self.name or 'anonymous'}, dim={self.dim})"


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeformationParams:
    """Deformation triple ``(eps1, eps2, eps3)`` for g_n, stored exactly."""

    n: int
    eps1: Fraction = Fraction(0)
    eps2: Fraction = Fraction(0)
    eps3: Fraction = Fraction(0)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        for name in ("eps1", "eps2", "eps3"):
            v = getattr(self, name)
            # normal forms can land in a quadratic field; keep those exact
            if isinstance(v, QuadraticNumber) and v.b:
                continue
            object.__setattr__(self, name, as_fraction(v))

    @classmethod
    def of(cls, n: int, eps) -> "DeformationParams":
        """Build from a sequence or a comma string like ``"1,1/2,0"``."""
        if isinstance(eps, str):
            eps = [e for e in eps.split(",")]
        eps = list(eps)
        if len(eps) != 3:
            raise ParameterError(f"need three deformation parameters, got {len(eps)}")
        return cls(n, *(as_fraction(e) for e in eps))

    @property
    def eps(self) -> Tuple[Fraction, Fraction, Fraction]:
        return (self.eps1, self.eps2, self.eps3)

    @property
    def eps_float(self) -> Tuple[float, float, float]:
        return tuple(float(e) for e in self.eps)

    @property
    def is_rational(self) -> bool:
        return all(isinstance(e, Fraction) for e in self.eps)

    def is_zero(self) -> bool:
        return not any(self.eps)

    def scaled(self, lam) -> "DeformationParams":
        lam = as_fraction(lam)
        return DeformationParams(self.n, *(lam * e for e in self.eps))

    def require_classifiable(self):
        if self.n < 3:
            raise ParameterError("classification is only established for n >= 3")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _orthogonal_block(labels_index: Dict[BasisLabel, int], m: int, table, form=None):
    """o(m) brackets [l_ij, l_kl] = d_ik l_jl + d_jl l_ik - d_il l_jk - d_jk l_il."""
    ls = _l_labels(m)
    for A, B in itertools.combinations(ls, 2):
        a, b = labels_index[A], labels_index[B]
        out: Dict[int, Fraction] = {}
        i, j, k, l = A.i, A.j, B.i, B.j
        for delta, (s, t), sign in (
            ((i, k), (j, l), 1),
            ((j, l), (i, k), 1),
            ((i, l), (j, k), -1),
            ((j, k), (i, l), -1),
        ):
            if delta[0] == delta[1] and s != t:
                lab, sg = BasisLabel.l(s, t)
                vec_axpy(out, 1, {labels_index[lab]: Fraction(sign * sg)})
        _put(table, a, b, out)


def _put(table, a: int, b: int, vec: Mapping[int, object]):
    if not vec:
        return
    if a < b:
        table[(a, b)] = list(vec.items())
    else:
        table[(b, a)] = [(c, -v) for c, v in vec.items()]


def build_standard(kind: str, n: int) -> StructureConstants:
    """Exact tables for ``orthogonal`` o(n), ``euclidean`` e_n = o(n)⋉R^n,
    ``heisenberg`` h_n, ``g_n`` = o(n)⋉h_n, and ``double_euclidean``
    o(n)⋉(R^n ⊕ R^n) (the quotient of g_n by its center)."""
    if not isinstance(n, int) or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    if kind == "orthogonal":
        if n < 2:
            raise ParameterError("o(n) needs n >= 2")
        labels = _l_labels(n)
        idx = {lab: k for k, lab in enumerate(labels)}
        table: dict = {}
        _orthogonal_block(idx, n, table)
        return StructureConstants(labels, table, n=n, name=f"o({n})")
    if kind == "euclidean":
        labels = _l_labels(n) + [BasisLabel("E", i) for i in range(1, n + 1)]
        idx = {lab: k for k, lab in enumerate(labels)}
        table = {}
        _orthogonal_block(idx, n, table)
        _rotation_action(idx, n, "E", table)
        return StructureConstants(labels, table, n=n, name=f"e_{n}")
    if kind == "heisenberg":
        labels = [BasisLabel("E", i) for i in range(1, 2 * n + 1)] + [BasisLabel("I")]
        idx = {lab: k for k, lab in enumerate(labels)}
        table = {}
        for i in range(1, n + 1):
            _put(table, idx[BasisLabel("E", i)], idx[BasisLabel("E", n + i)], {idx[BasisLabel("I")]: Fraction(1)})
        return StructureConstants(labels, table, n=n, name=f"h_{n}")
    if kind == "g_n":
        return build_deformed(DeformationParams(n))
    if kind == "double_euclidean":
        labels = g_labels(n)[:-1]
        idx = {lab: k for k, lab in enumerate(labels)}
        table = {}
        _orthogonal_block(idx, n, table)
        _rotation_action(idx, n, "X", table)
        _rotation_action(idx, n, "P", table)
        return StructureConstants(labels, table, n=n, name=f"o({n})⋉C^{2 * n}")
    raise ParameterError(f"unknown algebra kind {kind!r}")


def _rotation_action(idx, n: int, kind: str, table):
    """[l_ij, v_k] = d_ik v_j - d_jk v_i for the vector labels of one kind."""
    for i, j in itertools.combinations(range(1, n + 1), 2):
        a = idx[BasisLabel("L", i, j)]
        for k in range(1, n + 1):
            out = {}
            if k == i:
                out[idx[BasisLabel(kind, j)]] = Fraction(1)
            if k == j:
                out[idx[BasisLabel(kind, i)]] = Fraction(-1)
            _put(table, a, idx[BasisLabel(kind, k)], out)


def build_deformed(params: DeformationParams) -> StructureConstants:
    """Bracket table of g_n(eps1, eps2, eps3)."""
    n = params.n
    e1, e2, e3 = params.eps
    labels = g_labels(n)
    idx = {lab: k for k, lab in enumerate(labels)}
    table: dict = {}
    _orthogonal_block(idx, n, table)
    _rotation_action(idx, n, "X", table)
    _rotation_action(idx, n, "P", table)
    X = lambda i: idx[BasisLabel("X", i)]  # noqa: E731
    P = lambda i: idx[BasisLabel("P", i)]  # noqa: E731
    I = idx[BasisLabel("I")]

    def L(i, j):
        lab, s = BasisLabel.l(i, j)
        return idx[lab], s

    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i < j:
                li, s = L(i, j)
                _put(table, X(i), X(j), {li: s * e1})
                _put(table, P(i), P(j), {li: s * e2})
            out: Dict[int, Fraction] = {}
            if i == j:
                out[I] = Fraction(1)
            else:
                li, s = L(i, j)
                if e3:
                    out[li] = s * e3
            _put(table, X(i), P(j), out)
        _put(table, X(i), I, {k: v for k, v in ((X(i), e3), (P(i), -e1)) if v})
        _put(table, P(i), I, {k: v for k, v in ((X(i), e2), (P(i), -e3)) if v})
    name = f"g_{n}({','.join(str(e) for e in params.eps)})"
    return StructureConstants(labels, table, n=n, name=name)


@dataclass(frozen=True)
class BilinearForm:
    """Symmetric exact form on R^m; the last two basis vectors span the plane W."""

    matrix: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(as_fraction(v) for v in row) for row in self.matrix)
        m = len(rows)
        if m < 2 or any(len(r) != m for r in rows):
            raise ParameterError("form must be a square matrix of size >= 2")
        for a in range(m):
            for b in range(m):
                if rows[a][b] != rows[b][a]:
                    raise ParameterError("form is not symmetric")
        object.__setattr__(self, "matrix", rows)

    @property
    def size(self) -> int:
        return len(self.matrix)

    @classmethod
    def from_params(cls, params: DeformationParams) -> "BilinearForm":
        """Q_0 deformed along W: (v_{n+1},v_{n+1}) = eps1, (v_{n+2},v_{n+2}) = eps2,
        (v_{n+1},v_{n+2}) = eps3."""
        m = params.n + 2
        rows = [[Fraction(int(a == b and a < params.n)) for b in range(m)] for a in range(m)]
        rows[m - 2][m - 2] = params.eps1
        rows[m - 1][m - 1] = params.eps2
        rows[m - 2][m - 1] = rows[m - 1][m - 2] = params.eps3
        return cls(tuple(tuple(r) for r in rows))

    def signature(self) -> Tuple[int, int, int]:
        """``(positive, negative, null)`` computed exactly by symmetric elimination."""
        return exact_form_signature(self.matrix)


def exact_form_signature(matrix) -> Tuple[int, int, int]:
    """Sylvester signature of a symmetric rational matrix (congruence diagonalization)."""
    a = [[as_fraction(v) for v in row] for row in matrix]
    m = len(a)
    pos = neg = 0
    active = list(range(m))
    while active:
        piv = next((i for i in active if a[i][i] != 0), None)
        if piv is None:
            pair = next(((i, j) for i in active for j in active if i < j and a[i][j] != 0), None)
            if pair is None:
                break
            i, j = pair
            # replace e_i by e_i + e_j: diagonal becomes 2 a_ij != 0
            for k in range(m):
                a[i][k] += a[j][k]
            for k in range(m):
                a[k][i] += a[k][j]
            piv = i
        d = a[piv][piv]
        if d > 0:
            pos += 1
        else:
            neg += 1
        active.remove(piv)
        for r in active:
            f = a[r][piv] / d
            if f:
                for k in range(m):
                    a[r][k] -= f * a[piv][k]
        for r in active:
            a[piv][r] = a[r][piv] = Fraction(0)
    return pos, neg, m - pos - neg


def wedge_labels(n: int) -> Dict[Tuple[int, int], BasisLabel]:
    """Relabeling of v_a ∧ v_b (1-based, a < b <= n+2) to g_n labels."""
    out = {}
    for a, b in itertools.combinations(range(1, n + 3), 2):
        if b <= n:
            out[(a, b)] = BasisLabel("L", a, b)
        elif b == n + 1:
            out[(a, b)] = BasisLabel("X", a)
        elif a <= n:
            out[(a, b)] = BasisLabel("P", a)
        else:
            out[(a, b)] = BasisLabel("I")
    return out


def build_from_form(form: BilinearForm) -> StructureConstants:
    """Lie algebra on ∧²R^m from a symmetric form, in the g_n basis order.

    [a∧b, c∧d] = (a,c) b∧d - (a,d) b∧c - (b,c) a∧d + (b,d) a∧c.
    """
    m = form.size
    n = m - 2
    if n < 1:
        raise ParameterError("form must have size >= 3")
    B = form.matrix
    rel = wedge_labels(n)
    labels = g_labels(n)
    idx = {lab: k for k, lab in enumerate(labels)}
    pos = {pair: idx[lab] for pair, lab in rel.items()}

    def wedge(s, t) -> Tuple[Optional[int], int]:
        if s == t:
            return None, 0
        if s < t:
            return pos[(s, t)], 1
        return pos[(t, s)], -1

    table: dict = {}
    pairs = list(rel)
    for (a, b), (c, d) in itertools.combinations(pairs, 2):
        out: Dict[int, Fraction] = {}
        for coef, (s, t) in (
            (B[a - 1][c - 1], (b, d)),
            (-B[a - 1][d - 1], (b, c)),
            (-B[b - 1][c - 1], (a, d)),
            (B[b - 1][d - 1], (a, c)),
        ):
            if coef:
                k, sg = wedge(s, t)
                if k is not None:
                    vec_axpy(out, 1, {k: sg * coef})
        _put(table, pos[(a, b)], pos[(c, d)], out)
    return StructureConstants(labels, table, n=n, name="wedge2")


# ---------------------------------------------------------------------------
# evaluation and checks
# ---------------------------------------------------------------------------


def bracket(A: StructureConstants, u: Sequence, v: Sequence) -> list:
    """Bilinear extension of the table to coefficient vectors."""
    if len(u) != A.dim or len(v) != A.dim:
        raise ParameterError(f"vectors must have length {A.dim}")
    out = [0] * A.dim
    for a, b, vec in A.nonzero_pairs():
        ua, vb = u[a], v[b]
        if ua and vb:
            w = ua * vb
            for c, coeff in vec.items():
                out[c] = out[c] + coeff * w
    return out


def jacobiator_basis(A: StructureConstants, a: int, b: int, c: int) -> Dict[int, object]:
    """[[a,b],c] + [[b,c],a] + [[c,a],b] on basis elements."""
    out: Dict[int, object] = {}
    for (s, t), r in (((a, b), c), ((b, c), a), ((c, a), b)):
        for k, v in A.bracket_basis(s, t).items():
            vec_axpy(out, v, A.bracket_basis(k, r))
    return out


def jacobi_residual(A: StructureConstants):
    """Largest absolute Jacobiator coefficient over all basis triples (exact)."""
    worst = Fraction(0)
    for a, b, c in itertools.combinations(range(A.dim), 3):
        for v in jacobiator_basis(A, a, b, c).values():
            h = height(v)
            if h > worst:
                worst = h
    return worst


def killing_matrix(A: StructureConstants) -> np.ndarray:
    ad = A.ad_matrices()
    return np.einsum("aij,bji->ab", ad, ad)


def killing_form_exact(A: StructureConstants) -> List[List[Fraction]]:
    """Exact trace form tr(ad_u ad_v)."""
    K = [[Fraction(0)] * A.dim for _ in range(A.dim)]
    # ad_u[c, b] = c_ub^c  ->  tr(ad_u ad_v) = sum_{b,c} c_ub^c c_vc^b
    full = A._full
    for u in range(A.dim):
        for v in range(u, A.dim):
            s = Fraction(0)
            for b in range(A.dim):
                for c, x in full.get((u, b), {}).items():
                    y = full.get((v, c), {}).get(b)
                    if y:
                        s += x * y
            K[u][v] = K[v][u] = s
    return K


KILLING_ZERO_THRESHOLD = 1e-9


def killing_signature(A: StructureConstants, rel_tol: float = KILLING_ZERO_THRESHOLD) -> Tuple[int, int, int]:
    """(positives, negatives, nulls) of the trace form, via eigendecomposition.

    An eigenvalue counts as null when ``|mu| < rel_tol * max|mu|``.
    """
    K = killing_matrix(A)
    mu = np.linalg.eigvalsh(K)
    scale = float(np.max(np.abs(mu))) if mu.size else 0.0
    if scale == 0.0:
        return 0, 0, A.dim
    cut = rel_tol * scale
    return int(np.sum(mu > cut)), int(np.sum(mu < -cut)), int(np.sum(np.abs(mu) <= cut))
