"""Classification of the deformations g_n(eps) and explicit normal-form maps.

Every isomorphism built here comes from a linear change of the plane
W = span(v_{n+1}, v_{n+2}) on which the deformed quadratic form lives. If
``T`` maps (R^{n+2}, B_eps) isometrically onto (R^{n+2}, B'), then
``a∧b ↦ Ta∧Tb`` is a Lie algebra isomorphism g(eps) → g(B'). In the g_n basis
this reads

    x_i ↦ T00 x_i + T10 p_i,   p_i ↦ T01 x_i + T11 p_i,   I ↦ det(T) I,   l_ij ↦ l_ij.

Maps always go from g(source) to g(target); the printed formulas are
additionally checked in both directions and the validated direction recorded.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .exact import (
    Echelon,
    QuadraticNumber,
    exact_sqrt,
    fraction_str,
    height,
    to_json_scalar,
    vec_axpy,
)
from .lie_core import (
    BasisLabel,
    BilinearForm,
    DeformationParams,
    ParameterError,
    StructureConstants,
    build_deformed,
    g_labels,
    killing_form_exact,
    killing_signature,
)


class NotRealRepresentable(ParameterError):
    """The requested real normal form needs a non-real square root."""


COMPLEX_STRATA = ("U", "Conic", "LLine")
REAL_STRATA = ("R++", "R+-", "R--", "C+", "C-", "L", "Zero")

PAPER_COMPLEX_LABEL = {
    "U": "o(n+2,C)",
    "Conic": "o(n+1,C)⋉C^{n+1}",
    "LLine": "o(n,C)⋉d_n^C",
}

PAPER_REAL_LABEL = {
    "R++": "o(n+2)",
    "R+-": "o(n+1,1)",
    "R--": "o(n,2)",
    "C+": "o(n+1)⋉R^{n+1}",
    "C-": "o(n,1)⋉R^{n+1}",
    "L": "o(n)⋉d_n",
}


def instantiate(template: str, n: int) -> str:
    """Replace ``n``, ``n+1``, ``n+2`` in a label template by numbers."""
    out = re.sub(r"n(?:\+(\d))?", lambda m: str(n + int(m.group(1) or 0)), template)
    return re.sub(r"\^\{(\d+)\}", r"^\1", out)


def _nonzero_rational(params: DeformationParams) -> Tuple[Fraction, Fraction, Fraction]:
    if not params.is_rational:
        raise ParameterError("classification needs rational parameters")
    if params.is_zero():
        raise ParameterError("the zero triple is the undeformed algebra, not a stratum")
    return params.eps


def complex_stratum(params: DeformationParams) -> str:
    e1, e2, e3 = _nonzero_rational(params)
    if e3 * e3 == e1 * e2:
        return "Conic"
    if e1 and e2:
        return "U"
    return "LLine"


def real_stratum(params: DeformationParams) -> str:
    e1, e2, e3 = _nonzero_rational(params)
    if e3 * e3 == e1 * e2:
        # on the conic e1, e2 share a sign (or one vanishes)
        return "C+" if e1 + e2 > 0 else "C-"
    if e1 == 0 or e2 == 0:
        return "L"
    if e1 > 0 and e2 > 0:
        return "R++"
    if e1 < 0 and e2 < 0:
        return "R--"
    return "R+-"


@dataclass(frozen=True)
class StratumLabel:
    complex: str
    real: str


def stratum(params: DeformationParams) -> StratumLabel:
    return StratumLabel(complex_stratum(params), real_stratum(params))


def _offset(k: int) -> str:
    return "n" if k == 0 else f"n+{k}"


def derived_real_label(B_sig: Tuple[int, int, int]) -> str:
    """Isomorphism type of ∧²(R^{n+2}, B) read off the signature of B."""
    p, q, z = B_sig
    n = p + q + z - 2
    if z >= 2:
        return "o(n)⋉h_n"
    head = f"o({_offset(p - n)})" if q == 0 else f"o({_offset(p - n)},{q})"
    if z == 0:
        return head
    return head + "⋉R^{n+1}"


def derived_complex_label(B_sig: Tuple[int, int, int]) -> str:
    z = B_sig[2]
    if z == 0:
        return "o(n+2,C)"
    if z == 1:
        return "o(n+1,C)⋉C^{n+1}"
    return "o(n,C)⋉h_n^C"


def expected_killing_signature(B_sig: Tuple[int, int, int]) -> Tuple[int, int, int]:
    """Killing signature of o(p,q)⋉R^{p+q} (no radical when B is nondegenerate).

    The Levi factor o(p,q) has p*q noncompact directions, which are the
    positive ones; the abelian radical is null.
    """
    p, q, z = B_sig
    if z > 1:
        raise ParameterError("only defined for rank(B) >= n+1")
    pos = p * q
    neg = p * (p - 1) // 2 + q * (q - 1) // 2
    return pos, neg, z * (p + q)


@dataclass
class ComplexReport:
    eps: Tuple[Fraction, Fraction, Fraction]
    n: int
    stratum: str
    paper_label: str
    derived_label: str
    conflict: bool

    def to_json(self) -> dict:
        return {
            "eps": [fraction_str(e) for e in self.eps],
            "n": self.n,
            "complex_stratum": self.stratum,
            "paper_label": instantiate(self.paper_label, self.n),
            "paper_label_template": self.paper_label,
            "derived_label": instantiate(self.derived_label, self.n),
            "conflict": self.conflict,
        }


def classify_complex(params: DeformationParams) -> ComplexReport:
    s = complex_stratum(params)
    sig = BilinearForm.from_params(params).signature()
    derived = derived_complex_label(sig)
    paper = PAPER_COMPLEX_LABEL[s]
    return ComplexReport(params.eps, params.n, s, paper, derived, paper != derived)


@dataclass
class IsoClassReport:
    eps: Tuple[Fraction, Fraction, Fraction]
    n: int
    complex_stratum: str
    real_stratum: str
    paper_label: str
    derived_label: str
    B_signature: Tuple[int, int, int]
    killing_signature: Tuple[int, int, int]
    radical_dim: int
    killing_consistent: bool
    conflict: bool
    normal_form: Optional[dict] = None

    def to_json(self) -> dict:
        out = {
            "eps": [fraction_str(e) for e in self.eps],
            "n": self.n,
            "complex_stratum": self.complex_stratum,
            "real_stratum": self.real_stratum,
            "paper_label": instantiate(self.paper_label, self.n),
            "paper_label_template": self.paper_label,
            "derived_label": instantiate(self.derived_label, self.n),
            "B_signature": list(self.B_signature),
            "killing_signature": list(self.killing_signature),
            "radical_dim": self.radical_dim,
            "killing_consistent": self.killing_consistent,
            "conflict": self.conflict,
        }
        if self.normal_form is not None:
            out["normal_form"] = self.normal_form
        return out


def _exact_rank(matrix: Sequence[Sequence[Fraction]]) -> int:
    ech = Echelon(reduced=False)
    for row in matrix:
        ech.insert({k: v for k, v in enumerate(row) if v})
    return ech.rank


def classify_real(params: DeformationParams, with_normal_form: bool = False) -> IsoClassReport:
    """Real stratum, the printed label and invariants derived from the algebra itself."""
    params.require_classifiable()
    s = real_stratum(params)
    sig = BilinearForm.from_params(params).signature()
    A = build_deformed(params)
    ksig = killing_signature(A)
    radical = A.dim - _exact_rank(killing_form_exact(A))
    derived = derived_real_label(sig)
    consistent = ksig == expected_killing_signature(sig) and radical == ksig[2]
    report = IsoClassReport(
        eps=params.eps,
        n=params.n,
        complex_stratum=complex_stratum(params),
        real_stratum=s,
        paper_label=PAPER_REAL_LABEL[s],
        derived_label=derived,
        B_signature=sig,
        killing_signature=ksig,
        radical_dim=radical,
        killing_consistent=consistent,
        conflict=PAPER_REAL_LABEL[s] != derived,
    )
    if with_normal_form:
        try:
            report.normal_form = normal_form_map(params).summary()
        except NotRealRepresentable as exc:
            report.normal_form = {"error": str(exc)}
    return report


# ---------------------------------------------------------------------------
# linear maps between algebras of the family
# ---------------------------------------------------------------------------


def _field_of(values) -> Optional[int]:
    ds = {v.d for v in values if isinstance(v, QuadraticNumber) and v.b}
    if len(ds) > 1:
        raise ParameterError(f"entries from several quadratic fields {sorted(ds)}")
    return ds.pop() if ds else None


def _inv(x):
    if isinstance(x, int):
        return Fraction(1, x)
    return 1 / x


def _dense_inverse(matrix: List[List[object]]) -> List[List[object]]:
    """Gauss-Jordan inverse over Q or Q(sqrt d); raises on singular input."""
    m = len(matrix)
    a = [list(row) + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(matrix)]
    for col in range(m):
        piv = next((r for r in range(col, m) if a[r][col]), None)
        if piv is None:
            raise ParameterError("map is singular")
        a[col], a[piv] = a[piv], a[col]
        inv = _inv(a[col][col])
        a[col] = [v * inv for v in a[col]]
        for r in range(m):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[m:] for row in a]


def _determinant(matrix: List[List[object]]):
    m = len(matrix)
    a = [list(row) for row in matrix]
    det = Fraction(1)
    for col in range(m):
        piv = next((r for r in range(col, m) if a[r][col]), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det = det * a[col][col]
        inv = _inv(a[col][col])
        for r in range(col + 1, m):
            if a[r][col]:
                f = a[r][col] * inv
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det


@dataclass
class LinearBasisMap:
    """Linear map g(source) → g(target); column j holds the image of basis vector j."""

    matrix: List[List[object]]
    source: DeformationParams
    target: DeformationParams
    notes: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.source.n != self.target.n:
            raise ParameterError("source and target must share n")
        dim = len(g_labels(self.source.n))
        if len(self.matrix) != dim or any(len(r) != dim for r in self.matrix):
            raise ParameterError(f"matrix must be {dim}x{dim}")

    @property
    def dim(self) -> int:
        return len(self.matrix)

    @property
    def extension(self) -> Optional[int]:
        """``d`` when some entry lies in Q(sqrt d) rather than Q."""
        return _field_of(v for row in self.matrix for v in row)

    def image(self, j: int) -> Dict[int, object]:
        return {i: self.matrix[i][j] for i in range(self.dim) if self.matrix[i][j]}

    def determinant(self):
        return _determinant(self.matrix)

    def is_invertible(self) -> bool:
        return bool(self.determinant())

    def inverse(self) -> "LinearBasisMap":
        return LinearBasisMap(_dense_inverse(self.matrix), self.target, self.source)

    def compose(self, other: "LinearBasisMap") -> "LinearBasisMap":
        """``other ∘ self`` (first self, then other)."""
        m = self.dim
        prod = [
            [sum((other.matrix[i][k] * self.matrix[k][j] for k in range(m) if other.matrix[i][k] and self.matrix[k][j]), Fraction(0)) for j in range(m)]
            for i in range(m)
        ]
        return LinearBasisMap(prod, self.source, other.target)

    def nonzeros(self) -> List[dict]:
        labels = g_labels(self.source.n)
        out = []
        for j in range(self.dim):
            for i, v in self.image(j).items():
                out.append({"from": str(labels[j]), "to": str(labels[i]), "coeff": to_json_scalar(v)})
        return out

    def summary(self) -> dict:
        return {
            "source": [to_json_scalar(e) for e in self.source.eps],
            "target": [to_json_scalar(e) for e in self.target.eps],
            "extension_d": self.extension,
            "residual": fraction_str(is_isomorphism(self)),
            "invertible": self.is_invertible(),
            "notes": {k: _json_note(v) for k, v in self.notes.items()},
        }

    def to_json(self) -> dict:
        out = self.summary()
        out["entries"] = self.nonzeros()
        return out


def _json_note(v):
    if isinstance(v, (Fraction, QuadraticNumber)):
        return to_json_scalar(v)
    if isinstance(v, dict):
        return {k: _json_note(x) for k, x in v.items()}
    return v


def identity_map(params: DeformationParams, target: Optional[DeformationParams] = None) -> LinearBasisMap:
    dim = len(g_labels(params.n))
    mat = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    return LinearBasisMap(mat, params, target or params)


def w_map(
    source: DeformationParams,
    target: DeformationParams,
    T: Sequence[Sequence[object]],
    l_scale=Fraction(1),
    i_scale=None,
) -> LinearBasisMap:
    """Map induced by ``T`` on W (see module docstring).

    ``l_scale`` and ``i_scale`` override the images of l_ij and I; they exist
    to reproduce printed formulas that are not of the induced shape.
    """
    n = source.n
    labels = g_labels(n)
    idx = {lab: k for k, lab in enumerate(labels)}
    dim = len(labels)
    mat = [[Fraction(0)] * dim for _ in range(dim)]
    (t00, t01), (t10, t11) = T
    for lab in labels:
        if lab.kind == "L":
            mat[idx[lab]][idx[lab]] = l_scale
    for i in range(1, n + 1):
        X, P = idx[BasisLabel("X", i)], idx[BasisLabel("P", i)]
        mat[X][X], mat[P][X] = t00, t10
        mat[X][P], mat[P][P] = t01, t11
    I = idx[BasisLabel("I")]
    mat[I][I] = (t00 * t11 - t01 * t10) if i_scale is None else i_scale
    return LinearBasisMap(mat, source, target)


def _w_block(params: DeformationParams):
    e1, e2, e3 = params.eps
    return ((e1, e3), (e3, e2))


def transports_form(T, source: DeformationParams, target: DeformationParams) -> bool:
    """Exact check of ``T^t B_target T = B_source`` on W."""
    Bt, Bs = _w_block(target), _w_block(source)
    for a in range(2):
        for b in range(2):
            s = sum((T[i][a] * Bt[i][j] * T[j][b] for i in range(2) for j in range(2)), Fraction(0))
            if s != Bs[a][b]:
                return False
    return True


def is_isomorphism(
    phi: LinearBasisMap,
    A: Optional[StructureConstants] = None,
    B: Optional[StructureConstants] = None,
) -> Fraction:
    """Largest coefficient height of ``phi([u,v]_A) - [phi u, phi v]_B``.

    Zero exactly when ``phi`` is a homomorphism; invertibility is separate.
    """
    A = A if A is not None else build_deformed(phi.source)
    B = B if B is not None else build_deformed(phi.target)
    if A.dim != phi.dim or B.dim != phi.dim:
        raise ParameterError(f"dimension mismatch: map {phi.dim}, algebras {A.dim}, {B.dim}")
    images = [phi.image(j) for j in range(phi.dim)]
    worst = Fraction(0)
    for a, b in itertools.combinations(range(phi.dim), 2):
        diff: Dict[int, object] = {}
        for c, coeff in A.bracket_basis(a, b).items():
            vec_axpy(diff, coeff, images[c])
        for s, u in images[a].items():
            for t, v in images[b].items():
                br = B.bracket_basis(s, t)
                if br:
                    vec_axpy(diff, -(u * v), br)
        for v in diff.values():
            h = height(v)
            if h > worst:
                worst = h
    return worst


def direction_check(phi: LinearBasisMap) -> dict:
    """Test a printed map as stated and with the arrow reversed."""
    forward = is_isomorphism(phi)
    reverse_map = LinearBasisMap(phi.matrix, phi.target, phi.source)
    backward = is_isomorphism(reverse_map)
    if forward == 0 and phi.is_invertible():
        validated = "as_stated"
    elif backward == 0 and phi.is_invertible():
        validated = "reversed"
    else:
        validated = None
    return {"as_stated": forward, "reversed": backward, "validated": validated}


# ---------------------------------------------------------------------------
# normal forms
# ---------------------------------------------------------------------------


def paper_lambda(params: DeformationParams, allow_complex: bool = True):
    """Mixing coefficient (2 e1 e2 / e3^2)(1 - sqrt(1 - e3^2/(e1 e2))), exactly."""
    e1, e2, e3 = params.eps
    t = e3 * e3 / (e1 * e2)
    r = exact_sqrt(1 - t, allow_complex=allow_complex)
    return (2 / t) * (1 - r) if isinstance(r, QuadraticNumber) else Fraction(2) / t * (1 - r)


def _u_normal_form(params: DeformationParams, field: str) -> LinearBasisMap:
    e1, e2, e3 = params.eps
    n = params.n
    if e3 == 0:
        phi = identity_map(params)
        phi.notes.update(stratum="U", construction="already in normal form")
        return phi
    t = e3 * e3 / (e1 * e2)
    if 1 - t < 0 and field == "real":
        raise NotRealRepresentable(
            f"eps3^2 > eps1*eps2 on U: sqrt(1 - {t}) is not real; use field='complex'"
        )
    r = exact_sqrt(1 - t, allow_complex=True)
    lam = (2 / t) * (1 - r) if isinstance(r, QuadraticNumber) else Fraction(2) / t * (1 - r)
    a = lam * e3 / (2 * e2)
    b = lam * e3 / (2 * e1)
    nu = (1 + r) / 2
    target = DeformationParams(n, nu * e1, nu * e2, 0)
    T = ((Fraction(1), b), (a, Fraction(1)))
    assert transports_form(T, params, target)
    phi = w_map(params, target, T)

    printed = w_map(
        DeformationParams(n, e1, e2, 0), params, T, l_scale=lam, i_scale=1 - lam * lam * t / 4
    )
    printed_l_fixed = w_map(DeformationParams(n, e1, e2, 0), params, T)
    phi.notes.update(
        stratum="U",
        construction="shear x -> x + (lam e3/2e2) p, p -> p + (lam e3/2e1) x, l fixed",
        **{"lambda": lam, "nu": nu},
        paper_printed=direction_check(printed),
        paper_printed_l_fixed=direction_check(printed_l_fixed),
    )
    return phi


def _conic_normal_form(params: DeformationParams) -> LinearBasisMap:
    e1, e2, e3 = params.eps
    n = params.n
    if e1 == 0:
        phi = identity_map(params)
        phi.notes.update(stratum="Conic", construction="already in normal form (0,e2,0)")
        return phi
    s = e3 / e1
    target = DeformationParams(n, e1, 0, 0)
    T = ((Fraction(1), s), (Fraction(0), Fraction(1)))
    assert transports_form(T, params, target)
    phi = w_map(params, target, T)
    root = exact_sqrt(e2 / e1, allow_complex=True)
    printed = w_map(target, params, ((Fraction(1), root), (Fraction(0), Fraction(1))))
    phi.notes.update(
        stratum="Conic",
        construction="p -> p + (e3/e1) x",
        shear=s,
        paper_root=root,
        paper_printed=direction_check(printed) if e2 else None,
    )
    return phi


def _line_normal_form(params: DeformationParams) -> LinearBasisMap:
    e1, e2, e3 = params.eps
    n = params.n
    target = DeformationParams(n, 0, 0, 1)
    if e1 == 0:
        T = ((Fraction(1), e2 / (2 * e3)), (Fraction(0), e3))
        printed_src = params
        printed = ((Fraction(1), -e2 / (2 * e3)), (Fraction(0), Fraction(1)))
        construction = "p -> e3 p + (e2/2e3) x, I -> e3 I"
    else:
        T = ((e1 / (2 * e3), Fraction(1)), (e3, Fraction(0)))
        printed_src = None
        construction = "x -> (e1/2e3) x + e3 p, p -> x, I -> -e3 I"
    assert transports_form(T, params, target)
    phi = w_map(params, target, T)
    notes = dict(stratum="LLine", construction=construction)
    if printed_src is not None:
        # the printed map is quoted for the target (0,0,e3); it is only a
        # shear, so compare it against that rescaled normal form
        pm = w_map(printed_src, DeformationParams(n, 0, 0, e3), printed)
        notes["paper_printed"] = direction_check(pm)
    phi.notes.update(notes)
    return phi


def normal_form_map(params: DeformationParams, field: str = "real") -> LinearBasisMap:
    """Explicit isomorphism g(params) → g(normal form) for the stratum of ``params``.

    U goes to nu*(e1, e2, 0) with nu = (1 + sqrt(1 - e3^2/(e1 e2)))/2, the
    conic to (e1, 0, 0) or (0, e2, 0), the lines to (0, 0, 1). Entries are
    rational or lie in one quadratic field, reported as ``extension``.
    """
    if field not in ("real", "complex"):
        raise ParameterError(f"field must be 'real' or 'complex', got {field!r}")
    s = complex_stratum(params)
    if s == "U":
        return _u_normal_form(params, field)
    if s == "Conic":
        return _conic_normal_form(params)
    return _line_normal_form(params)


def effective_parameter_map(params: DeformationParams, field: str = "real") -> LinearBasisMap:
    """Isomorphism g(e1, e2, e3) → g(e1, e2, 0) on U (Gram-Schmidt in W).

    Other strata fall back to :func:`normal_form_map`.
    """
    if complex_stratum(params) != "U":
        return normal_form_map(params, field)
    e1, e2, e3 = params.eps
    t = e3 * e3 / (e1 * e2)
    if 1 - t < 0 and field == "real":
        raise NotRealRepresentable(f"sqrt(1 - {t}) is not real")
    r = exact_sqrt(1 - t, allow_complex=True)
    target = DeformationParams(params.n, e1, e2, 0)
    T = ((Fraction(1), e3 / e1), (Fraction(0), r))
    assert transports_form(T, params, target)
    phi = w_map(params, target, T)
    phi.notes.update(stratum="U", construction="p -> (e3/e1) x + r p, I -> r I", r=r)
    return phi


def scaling_map(params: DeformationParams, a, b) -> LinearBasisMap:
    """g(a^2 e1, b^2 e2, a b e3) → g(e1, e2, e3): x -> a x, p -> b p, I -> ab I."""
    e1, e2, e3 = params.eps
    source = DeformationParams(params.n, a * a * e1, b * b * e2, a * b * e3)
    zero = Fraction(0)
    return w_map(source, params, ((a, zero), (zero, b)))


def rescaling_map(params: DeformationParams, lam, allow_complex: bool = False) -> LinearBasisMap:
    """g(lam * eps) → g(eps) by scaling x, p by sqrt(lam) and I by lam."""
    s = exact_sqrt(lam, allow_complex=allow_complex)
    if not s:
        raise ParameterError("scaling factor must be nonzero")
    return scaling_map(params, s, s)
