import cmath
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from conftest import small_rationals, triples
from phasedeform import deformation as d
from phasedeform.exact import QuadraticNumber
from phasedeform.lie_core import BilinearForm, DeformationParams, ParameterError


def P(eps, n=3):
    return DeformationParams.of(n, eps)


def to_complex(v):
    if isinstance(v, QuadraticNumber):
        return complex(v.a) + complex(v.b) * cmath.sqrt(v.d)
    return complex(v)


def tensor(n, eps):
    """Oracle structure tensor at arbitrary (even non-rational) eps, using linearity in eps."""
    T0 = oracles.structure_tensor(n, (0, 0, 0), dtype=float).astype(complex)
    out = T0.copy()
    for k in range(3):
        unit = [0, 0, 0]
        unit[k] = 1
        out += to_complex(eps[k]) * (oracles.structure_tensor(n, unit, dtype=float) - T0)
    return out


def float_homomorphism_defect(phi):
    """max |phi[a,b] - [phi a, phi b]| with the oracle tensors, in complex floats."""
    n = phi.source.n
    M = np.array([[to_complex(v) for v in row] for row in phi.matrix])
    TA, TB = tensor(n, phi.source.eps), tensor(n, phi.target.eps)
    lhs = np.einsum("abc,ic->abi", TA, M)
    rhs = np.einsum("sa,tb,sti->abi", M, M, TB)
    return float(np.abs(lhs - rhs).max())


class TestStrata:
    @pytest.mark.parametrize(
        "eps,cplx,real",
        [
            ("1,1,0", "U", "R++"),
            ("1,-1,0", "U", "R+-"),
            ("-1,-1,0", "U", "R--"),
            ("1,1,3/5", "U", "R++"),
            ("1,0,0", "Conic", "C+"),
            ("0,1,0", "Conic", "C+"),
            ("1,4,2", "Conic", "C+"),
            ("-1,0,0", "Conic", "C-"),
            ("-1,-1,1", "Conic", "C-"),
            ("0,0,1", "LLine", "L"),
            ("0,4,1", "LLine", "L"),
            ("1,0,1", "LLine", "L"),
        ],
    )
    def test_examples(self, eps, cplx, real):
        s = d.stratum(P(eps))
        assert (s.complex, s.real) == (cplx, real)

    def test_zero_triple_refused(self):
        with pytest.raises(ParameterError):
            d.stratum(P("0,0,0"))

    @settings(max_examples=60)
    @given(triples())
    def test_strata_are_projective(self, eps):
        lam = Fraction(-3, 2)
        a, b = d.stratum(DeformationParams(3, *eps)), d.stratum(DeformationParams(3, *(lam * e for e in eps)))
        assert a.complex == b.complex
        # a negative scale flips the sign of B on W, which swaps C+ and C-
        swap = {"C+": "C-", "C-": "C+", "R++": "R--", "R--": "R++"}
        assert b.real == swap.get(a.real, a.real)

    def test_instantiate(self):
        assert d.instantiate("o(n+1,1)⋉R^{n+1}", 3) == "o(4,1)⋉R^4"
        assert d.instantiate("o(n+2)", 4) == "o(6)"


class TestClassification:
    @pytest.mark.parametrize(
        "eps,derived,bsig,ksig",
        [
            ("1,1,0", "o(n+2)", (5, 0, 0), (0, 10, 0)),
            ("1,-1,0", "o(n+1,1)", (4, 1, 0), (4, 6, 0)),
            ("-1,-1,0", "o(n,2)", (3, 2, 0), (6, 4, 0)),
            ("1,0,0", "o(n+1)⋉R^{n+1}", (4, 0, 1), (0, 6, 4)),
            ("0,-1,0", "o(n,1)⋉R^{n+1}", (3, 1, 1), (3, 3, 4)),
            ("0,0,1", "o(n+1,1)", (4, 1, 0), (4, 6, 0)),
        ],
    )
    def test_report_table(self, eps, derived, bsig, ksig):
        r = d.classify_real(P(eps))
        assert r.derived_label == derived
        assert r.B_signature == bsig and r.killing_signature == ksig
        assert r.killing_consistent

    @pytest.mark.parametrize("eps", ["0,1,5", "0,0,1", "1,1,2"])
    def test_conflicts_are_flagged(self, eps):
        # nondegenerate B of signature (n+1,1) gives o(n+1,1), whatever the printed label says
        r = d.classify_real(P(eps))
        assert r.conflict and r.derived_label == "o(n+1,1)"

    @pytest.mark.parametrize("eps", ["1,1,0", "1,-1,0", "-1,-1,0", "1,0,0", "-1,0,0", "1,4,2"])
    def test_no_conflict_elsewhere(self, eps):
        assert not d.classify_real(P(eps)).conflict

    @settings(max_examples=30)
    @given(triples(), st.integers(3, 5))
    def test_B_signature_against_numpy(self, eps, n):
        p = DeformationParams(n, *eps)
        e1, e2, e3 = map(float, eps)
        B = np.eye(n + 2)
        B[n:, n:] = [[e1, e3], [e3, e2]]
        ev = np.linalg.eigvalsh(B)
        null = np.abs(ev) < 1e-12
        expected = (int(np.sum((ev > 0) & ~null)), int(np.sum((ev < 0) & ~null)), int(np.sum(null)))
        assert BilinearForm.from_params(p).signature() == expected

    @settings(max_examples=20)
    @given(triples())
    def test_killing_consistency_everywhere(self, eps):
        assert d.classify_real(DeformationParams(3, *eps)).killing_consistent

    def test_classification_needs_n_at_least_3(self):
        with pytest.raises(ParameterError):
            d.classify_real(P("1,1,0", n=2))

    def test_complex_labels(self):
        assert d.classify_complex(P("1,-1,0")).derived_label == "o(n+2,C)"
        assert d.classify_complex(P("1,0,0")).derived_label == "o(n+1,C)⋉C^{n+1}"
        assert d.classify_complex(P("0,0,1")).conflict

    def test_json(self):
        doc = d.classify_real(P("1,1,2"), with_normal_form=True).to_json()
        assert doc["paper_label"] == "o(5)" and doc["derived_label"] == "o(4,1)"
        assert "error" in doc["normal_form"]


class TestNormalForms:
    @pytest.mark.parametrize("name,gen", [
        ("U", lambda e1, e2, e3: (e1, e2, e3)),
        ("Conic", lambda e1, e2, e3: (e1 * e1, e2 * e2, e1 * e2)),
        ("LLine", lambda e1, e2, e3: (0, e2, e3)),
    ])
    @settings(max_examples=50)
    @given(data=st.data())
    def test_exact_and_float_oracle(self, name, gen, data):
        a = data.draw(small_rationals.filter(bool))
        b = data.draw(small_rationals.filter(bool))
        c = data.draw(small_rationals.filter(bool))
        eps = gen(a, b, c)
        p = DeformationParams(3, *eps)
        assume(d.complex_stratum(p) == name)
        phi = d.normal_form_map(p, field="complex")
        assert d.is_isomorphism(phi) == 0
        assert phi.is_invertible()
        assert float_homomorphism_defect(phi) < 1e-9
        if phi.target.is_rational:
            assert d.complex_stratum(phi.target) == name

    def test_lambda_ten_ninths(self):
        p = P("1,1,3/5")
        # oracle by hand: t = 9/25, sqrt(1 - t) = 4/5, lambda = (2/t)(1/5) = 10/9
        assert d.paper_lambda(p) == Fraction(10, 9)
        phi = d.normal_form_map(p)
        assert phi.notes["lambda"] == Fraction(10, 9) and phi.notes["nu"] == Fraction(9, 10)
        assert phi.target.eps == (Fraction(9, 10), Fraction(9, 10), 0)
        assert d.is_isomorphism(phi) == 0 and phi.extension is None

    def test_quadratic_field_case(self):
        phi = d.normal_form_map(P("2,-3,1"))
        assert phi.extension == 42
        assert d.is_isomorphism(phi) == 0 and float_homomorphism_defect(phi) < 1e-9

    def test_not_real_representable(self):
        with pytest.raises(d.NotRealRepresentable):
            d.normal_form_map(P("1,1,2"))
        phi = d.normal_form_map(P("1,1,2"), field="complex")
        assert phi.extension == -3 and d.is_isomorphism(phi) == 0

    def test_bad_field(self):
        with pytest.raises(ParameterError):
            d.normal_form_map(P("1,1,0"), field="quaternion")

    def test_conic_printed_map_validates_reversed(self):
        notes = d.normal_form_map(P("1,4,2")).notes
        assert notes["paper_printed"]["validated"] == "reversed"

    def test_line_printed_map_validates_reversed(self):
        notes = d.normal_form_map(P("0,4,1")).notes
        assert notes["paper_printed"]["validated"] == "reversed"

    def test_printed_shear_fails_both_ways(self):
        notes = d.normal_form_map(P("1,1,3/5")).notes
        assert notes["paper_printed"]["validated"] is None
        assert notes["paper_printed_l_fixed"]["validated"] is None

    def test_inverse_and_compose(self):
        phi = d.normal_form_map(P("1,4,2"))
        ident = phi.compose(phi.inverse())
        assert ident.matrix == d.identity_map(phi.source).matrix
        assert d.is_isomorphism(phi.inverse()) == 0


class TestOtherMaps:
    def test_rescaling_by_two_needs_sqrt2(self):
        phi = d.rescaling_map(P("1,-1,1/3"), 2)
        assert phi.extension == 2
        assert phi.source.eps == (2, -2, Fraction(2, 3))
        assert d.is_isomorphism(phi) == 0 and float_homomorphism_defect(phi) < 1e-9

    def test_rescaling_by_zero(self):
        with pytest.raises(ParameterError):
            d.rescaling_map(P("1,1,0"), 0)

    def test_negative_rescaling_is_complex(self):
        with pytest.raises(Exception):
            d.rescaling_map(P("1,1,0"), -1)
        phi = d.rescaling_map(P("1,1,0"), -1, allow_complex=True)
        assert d.is_isomorphism(phi) == 0

    @settings(max_examples=30)
    @given(triples())
    def test_effective_parameter_map(self, eps):
        p = DeformationParams(3, *eps)
        assume(d.complex_stratum(p) == "U")
        phi = d.effective_parameter_map(p, field="complex")
        assert phi.target.eps == (eps[0], eps[1], 0)
        assert d.is_isomorphism(phi) == 0 and phi.is_invertible()

    def test_direction_check_on_known_map(self):
        phi = d.normal_form_map(P("1,4,2"))
        assert d.direction_check(phi)["validated"] == "as_stated"
        assert d.direction_check(phi.inverse())["validated"] == "as_stated"
        flipped = d.LinearBasisMap(phi.matrix, phi.target, phi.source)
        assert d.direction_check(flipped)["validated"] == "reversed"

    def test_is_isomorphism_detects_non_homomorphism(self):
        phi = d.identity_map(P("1,1,0"), P("1,2,0"))
        assert d.is_isomorphism(phi) > 0
        assert float_homomorphism_defect(phi) > 0.5

    def test_summary_json(self):
        doc = d.normal_form_map(P("2,-3,1")).to_json()
        assert doc["extension_d"] == 42 and doc["residual"] == "0/1"
        assert doc["entries"] and all({"from", "to", "coeff"} <= set(e) for e in doc["entries"])
