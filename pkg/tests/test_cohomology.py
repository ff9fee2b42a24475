import itertools

import numpy as np
import pytest

import oracles
from phasedeform import cohomology as coh
from phasedeform.lie_core import StructureError, build_standard


@pytest.fixture(scope="module")
def g3():
    return build_standard("g_n", 3)


@pytest.fixture(scope="module")
def e3():
    return build_standard("euclidean", 3)


def relative_d1_rank_oracle(T, h):
    """Dense rank of d1: Hom(h, g) -> Hom(∧²h, g) for an abelian ideal h."""
    dim = T.shape[0]
    pairs = list(itertools.combinations(range(len(h)), 2))
    M = np.zeros((len(pairs) * dim, len(h) * dim))
    for col_h, o in itertools.product(range(len(h)), range(dim)):
        # f(h[col_h]) = e_o
        for r, (a, b) in enumerate(pairs):
            # (df)(a, b) = [a, f(b)] - [b, f(a)]   (the f([a,b]) term vanishes)
            if b == col_h:
                M[r * dim:(r + 1) * dim, col_h * dim + o] += T[h[a], o]
            if a == col_h:
                M[r * dim:(r + 1) * dim, col_h * dim + o] -= T[h[b], o]
    return np.linalg.matrix_rank(M)


class TestComplex:
    def test_shape_bookkeeping(self, e3):
        d1 = coh.coboundary_matrix(e3, ["e1", "e2", "e3"], 1)
        assert d1.shape == (18, 18)

    def test_rank_of_d1_on_translations(self, e3):
        d1 = coh.coboundary_matrix(e3, ["e1", "e2", "e3"], 1)
        T = oracles.euclidean_tensor(3)
        assert d1.rank() == relative_d1_rank_oracle(T, [3, 4, 5]) == 9

    @pytest.mark.parametrize("kind", ["g_n", "euclidean", "double_euclidean"])
    def test_d_squared_is_zero(self, kind):
        g = build_standard(kind, 3)
        labs = [str(lab) for lab in g.labels if not str(lab).startswith("l")]
        for k in (1, 2):
            assert coh.coboundary_matrix(g, labs, k + 1).compose_is_zero(coh.coboundary_matrix(g, labs, k))

    def test_non_ideal_rejected(self, g3):
        with pytest.raises(StructureError):
            coh.coboundary_matrix(g3, ["l12"], 1)


class TestCohomologyDimensions:
    @pytest.mark.parametrize(
        "kind,n,k,expected",
        [("g_n", 3, 2, 3), ("euclidean", 3, 2, 1), ("orthogonal", 3, 2, 0), ("orthogonal", 3, 1, 0), ("g_n", 3, 1, 4)],
    )
    def test_small_cases_against_dense_oracle(self, kind, n, k, expected):
        tensors = {
            "g_n": lambda: oracles.structure_tensor(n, (0, 0, 0), dtype=float),
            "euclidean": lambda: oracles.euclidean_tensor(n),
            "orthogonal": lambda: oracles.orthogonal_tensor(n),
        }
        assert oracles.ce_dimension(tensors[kind](), k) == expected
        res = coh.cohomology_dim(build_standard(kind, n), k, with_reps=False)
        assert res.dimension == expected
        assert res.dimension == res.cochain_dim - res.rank_out - res.rank_in

    def test_representatives_are_cocycles_not_coboundaries(self, g3):
        res = coh.cohomology_dim(g3, 2)
        all_labels = [str(lab) for lab in g3.labels]
        d2 = coh.coboundary_matrix(g3, all_labels, 2)
        assert len(res.representatives) == 3
        for rep in res.representatives:
            assert not d2.apply(rep.vector())
            assert not coh.is_coboundary(g3, all_labels, rep.vector(), 2)

    def test_json(self, e3):
        doc = coh.cohomology_dim(e3, 2).to_json()
        assert doc["dimension"] == 1 and doc["degree"] == 2
        assert all("/" in t["coeff"] for rep in doc["representatives"] for t in rep)

    def test_deterministic_representatives(self, e3):
        a = coh.cohomology_dim(e3, 2).to_json()
        b = coh.cohomology_dim(build_standard("euclidean", 3), 2).to_json()
        assert a == b


class TestInvariantCocycles:
    def test_euclidean_generator(self, e3):
        res = coh.invariant_cocycles(e3, ["e1", "e2", "e3"], ["l12", "l13", "l23"])
        assert res.dimension == 1
        assert res.representatives[0].pretty() == {
            "e1,e2": {"l12": "1/1"},
            "e1,e3": {"l13": "1/1"},
            "e2,e3": {"l23": "1/1"},
        }

    def test_g3_span_matches_deformation_cocycles(self, g3):
        h, k = coh.heisenberg_ideal(3), coh.orthogonal_part(3)
        res = coh.invariant_cocycles(g3, h, k)
        assert res.dimension == 3
        assert coh.class_span_equal(g3, h, res.representatives, coh.deformation_cocycles(3))

    def test_deformation_cocycles_invariant_and_independent(self, g3):
        h, k = coh.heisenberg_ideal(3), coh.orthogonal_part(3)
        fam = coh.deformation_cocycles(3)
        d2 = coh.coboundary_matrix(g3, h, 2)
        for f in fam:
            assert not d2.apply(f.vector())
            assert not coh.is_coboundary(g3, h, f.vector())
            for y in k:
                assert coh.is_coboundary(g3, h, coh.invariance_defect(f, y))
        assert coh.quotient_rank(g3, h, fam) == 3

    def test_printed_cocycles_need_their_I_terms(self, g3):
        # as displayed (l-valued only) they are invariant and independent but not closed in g_3
        h, k = coh.heisenberg_ideal(3), coh.orthogonal_part(3)
        d2 = coh.coboundary_matrix(g3, h, 2)
        printed = coh.printed_cocycles(g3, 3)
        assert all(d2.apply(f.vector()) for f in printed)
        assert all(coh.is_coboundary(g3, h, coh.invariance_defect(f, y)) for f in printed for y in k)
        assert coh.quotient_rank(g3, h, printed) == 3
        # the l-components agree with the closed deformation cocycles
        for f, full in zip(printed, coh.deformation_cocycles(3)):
            stripped = {key: val for key, val in full.pretty().items() if "I" not in key}
            stripped = {key: {o: c for o, c in val.items() if o.startswith("l")} for key, val in stripped.items()}
            assert {key: val for key, val in stripped.items() if val} == f.pretty()

    def test_quotient_model_differs(self):
        g = build_standard("double_euclidean", 3)
        h = [s for s in coh.heisenberg_ideal(3) if s != "I"]
        k = coh.orthogonal_part(3)
        res = coh.invariant_cocycles(g, h, k)
        # dense oracle on the full complex of o(3)⋉C^6
        T = oracles.structure_tensor(3, (0, 0, 0), dtype=float)
        keep = [i for i, lab in enumerate(oracles.labels(3)) if lab != "I"]
        assert res.dimension == oracles.ce_dimension(T[np.ix_(keep, keep, keep)], 2) == 4
        printed = coh.printed_cocycles(g, 3)
        d2 = coh.coboundary_matrix(g, h, 2)
        assert all(d2.apply(f.vector()) for f in printed)

    def test_bad_decomposition(self, g3):
        with pytest.raises(StructureError):
            coh.invariant_cocycles(g3, coh.heisenberg_ideal(3), ["l12", "l13"])


class TestHochschildSerreAndWhitehead:
    @pytest.mark.parametrize("kind,h,expected", [("g_n", "heis", 3), ("euclidean", "trans", 1)])
    def test_dimension_identity(self, kind, h, expected):
        g = build_standard(kind, 3)
        hh = coh.heisenberg_ideal(3) if h == "heis" else ["e1", "e2", "e3"]
        rep = coh.hochschild_serre_check(g, hh, coh.orthogonal_part(3))
        assert rep == {"dim_H2_g_g": expected, "dim_H2_h_g_inv": expected, "equal": True}

    @pytest.mark.parametrize("n", [3, 4])
    def test_whitehead(self, n):
        g = build_standard("g_n", n)
        rep = coh.whitehead_check(g, coh.heisenberg_ideal(n), coh.orthogonal_part(n))
        assert rep and all(v == 0 for v in rep.values())

    @pytest.mark.parametrize("k,expected", [(1, 19), (2, 55)])
    def test_relative_cohomology_against_oracle(self, g3, k, expected):
        T = oracles.structure_tensor(3, (0, 0, 0), dtype=float)
        assert oracles.ce_dimension(T, k, dom=range(3, 10)) == expected
        assert coh.relative_cohomology(g3, coh.heisenberg_ideal(3), k).dimension == expected
