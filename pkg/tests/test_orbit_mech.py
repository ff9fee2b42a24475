import csv
import io
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import triples
from phasedeform import orbit_mech as om
from phasedeform.lie_core import DeformationParams, ParameterError, build_deformed


def P(eps, n=3):
    return DeformationParams.of(n, eps)


def to_sympy(poly, xs):
    out = 0
    for mono, c in poly.terms.items():
        term = sp.Rational(c.numerator, c.denominator)
        for i in mono:
            term *= xs[i]
        out += term
    return sp.expand(out)


def chart(q, p):
    return om.ChartPoint(tuple(q), tuple(p))


# |q|^2 <= 3/4 keeps 1 + eps2 q^2 > 0 for eps2 >= -1
chart_coords = st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3)


class TestBrackets:
    def test_canonical_pair(self):
        A = build_deformed(P("0,0,0"))
        pt = om.DualPoint.from_parts(P("0,0,0"), I=1.0)
        assert om.lie_poisson_bracket(A, om.coordinate(A, "x1"), om.coordinate(A, "p1"), pt.coords) == 1

    def test_rotation_acts_on_x(self):
        A = build_deformed(P("0,0,0"))
        pt = om.DualPoint.from_parts(P("0,0,0"), x=[0, 1, 0])
        assert om.lie_poisson_bracket(A, om.coordinate(A, "l12"), om.coordinate(A, "x1"), pt.coords) == 1

    def test_self_bracket_vanishes(self):
        A = build_deformed(P("1,2,3"))
        F = om.invariant_quadratic(3, I2=1, x2=2) + om.coordinate(A, "p2")
        assert om.lie_poisson_poly(A, F, F).is_zero()

    def test_callable_matches_polynomial(self):
        A = build_deformed(P("1,-1,1/2"))
        rng = np.random.default_rng(3)
        xi = rng.normal(size=A.dim)
        F = om.invariant_quadratic(3, x2=1, l2=2)
        G = om.coordinate(A, "p1") * om.coordinate(A, "I")
        exact = om.lie_poisson_bracket(A, F, G, list(xi))
        numeric = om.lie_poisson_bracket(A, lambda y: om.Poly.evaluate(F, y), lambda y: om.Poly.evaluate(G, y), xi)
        assert abs(exact - numeric) < 1e-6

    @settings(max_examples=20)
    @given(triples(nonzero=False))
    def test_poisson_matrix_is_oracle_contraction(self, eps):
        A = build_deformed(DeformationParams(3, *eps))
        xi = np.linspace(-1, 1, A.dim)
        T = oracles.structure_tensor(3, eps, dtype=float)
        assert np.allclose(om.poisson_matrix(A, xi), np.einsum("abc,c->ab", T, xi), atol=1e-12)

    def test_leibniz(self):
        A = build_deformed(P("1,2,-1"))
        x1, p2, I = (om.coordinate(A, s) for s in ("x1", "p2", "I"))
        lhs = om.lie_poisson_poly(A, x1 * p2, I)
        rhs = x1 * om.lie_poisson_poly(A, p2, I) + p2 * om.lie_poisson_poly(A, x1, I)
        assert lhs == rhs


class TestCasimirs:
    def test_flat_contains_I_squared(self):
        cas = om.quadratic_casimirs(P("0,0,0"))
        Ipoly = om.invariant_quadratic(3, I2=1)
        assert any(c.poly == Ipoly for c in cas)

    def test_compact_case(self):
        (cas,) = om.quadratic_casimirs(P("1,1,0"))
        assert cas.poly == om.invariant_quadratic(3, I2=1, x2=1, p2=1, l2=1)

    def test_two_three_zero(self):
        (cas,) = om.quadratic_casimirs(P("2,3,0"))
        assert cas.grouped() == {"I2": 1, "x2": 3, "p2": 2, "xp": 0, "l2": 6}

    @pytest.mark.parametrize("eps", ["2,3,0", "1,-2,1/2", "0,1,0"])
    def test_against_sympy_nullspace(self, eps):
        p = P(eps)
        xs, basis = oracles.quadratic_center(3, p.eps)
        got = om.quadratic_casimirs(p)
        assert len(got) == len(basis) == 1
        I2 = xs[-1] ** 2
        ref = basis[0] / sp.Poly(basis[0], *xs).coeff_monomial(I2)
        assert sp.expand(to_sympy(got[0].poly, xs) - ref) == 0

    @settings(max_examples=10)
    @given(triples())
    def test_derived_is_central_and_unique(self, eps):
        p = DeformationParams(3, *eps)
        A = build_deformed(p)
        K = om.derived_casimir(p)
        assert K.centrality_residual(A) == 0
        cas = om.quadratic_casimirs(p, A)
        assert len(cas) == 1 and cas[0].poly == K.poly

    def test_printed_comparison_warns(self):
        rep = om.casimir_comparison(P("2,3,0"))
        assert rep["status"] == "WARN"
        assert rep["derived_centrality_residual"] == "0/1"
        assert rep["printed_centrality_residual"] != "0/1"

    def test_printed_agrees_when_symmetric(self):
        assert om.casimir_comparison(P("1,1,1/2"))["status"] == "PASS"

    def test_json_and_pretty(self):
        K = om.derived_casimir(P("2,3,0"))
        assert K.pretty() == "1/1*I^2 + 3/1*x^2 + 2/1*p^2 + 6/1*l^2"
        assert K.to_json()["grouped"]["l2"] == "6/1"


class TestOrbits:
    def test_flat_base_point(self):
        spec = om.OrbitSpec(P("0,0,0"))
        r = om.orbit_residuals(spec, om.DualPoint.from_parts(P("0,0,0"), I=1.0))
        assert r.max() == 0

    def test_negative_control(self):
        spec = om.OrbitSpec(P("0,0,0"))
        r = om.orbit_residuals(spec, om.DualPoint.from_parts(P("0,0,0"), I=1.0, l={(1, 2): 1.0}))
        assert r.angular == 1

    def test_level_must_be_positive(self):
        with pytest.raises(ParameterError):
            om.OrbitSpec(P("0,0,0"), level=0)

    def test_point_shape(self):
        with pytest.raises(ParameterError):
            om.DualPoint(P("0,0,0"), np.zeros(4))

    @settings(max_examples=40)
    @given(chart_coords, chart_coords, st.sampled_from([-1, -0.5, 0, 0.5, 1, 2]), st.sampled_from([1, -1]))
    def test_chart_points_lie_on_orbit(self, q, p, eps2, branch):
        pt = om.chart_to_point(eps2, chart(q, p), branch)
        assert om.orbit_residuals(om.OrbitSpec(pt.params), pt).max() <= 1e-12
        back = om.point_to_chart(pt)
        assert np.allclose(back.q, q, atol=1e-14) and back.p == tuple(p)


class TestChart:
    def test_flat_chart(self):
        pt = om.chart_to_point(0, chart([1, 2, 3], [4, 5, 6]))
        assert pt.I == 1 and list(pt.x) == [1, 2, 3]
        assert pt.l_matrix[0, 1] == 1 * 5 - 2 * 4

    def test_origin(self):
        pt = om.chart_to_point(1, chart([0, 0, 0], [1, 2, 3]))
        assert pt.I == 1 and not pt.x.any() and not pt.l_matrix.any()

    def test_unit_q(self):
        pt = om.chart_to_point(1, chart([1, 0, 0], [0, 0, 0]))
        assert pt.I == pytest.approx(1 / math.sqrt(2), abs=1e-15)
        assert np.allclose(pt.x, [1 / math.sqrt(2), 0, 0], atol=1e-15)

    def test_domain(self):
        with pytest.raises(om.ChartDomainError):
            om.chart_to_point(-1, chart([1, 0, 0], [0, 0, 0]))
        with pytest.raises(ParameterError):
            om.chart_to_point(1, chart([0, 0, 0], [0, 0, 0]), branch=2)

    def test_liouville_examples(self):
        c = chart([0, 0, 0], [1, 2, 3])
        assert list(om.liouville_form(1, c)) == [1, 2, 3, 0, 0, 0]
        flat = om.symplectic_matrix(0, chart([0.3, 0.1, 0.2], [1, 2, 3]))
        J = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])
        assert np.array_equal(flat, J)

    @settings(max_examples=25)
    @given(chart_coords, chart_coords, st.sampled_from([-0.5, 0.5, 1, 2]))
    def test_symplectic_matrix_against_finite_differences(self, q, p, eps2):
        c = chart(q, p)
        Om = om.symplectic_matrix(eps2, c)
        assert np.allclose(Om, -Om.T)
        assert np.abs(Om - oracles.omega_fd(eps2, np.array(q), np.array(p))).max() < 1e-8

    @settings(max_examples=25)
    @given(chart_coords, chart_coords, st.sampled_from([-0.5, 0.5, 1, 2]), st.sampled_from([1, -1]))
    def test_inverse_form_gives_lie_poisson_brackets(self, q, p, eps2, branch):
        c = chart(q, p)
        Pc = om.chart_poisson_matrix(eps2, c, branch)
        # Poisson tensor of omega is (Omega^-1)^T = -Omega^-1
        assert np.abs(np.linalg.inv(om.symplectic_matrix(eps2, c)) + Pc).max() < 1e-10
        assert np.abs(om.canonical_chart_brackets(eps2, c) - Pc).max() < 1e-10
        if branch == 1:
            assert np.abs(oracles.chart_brackets_fd(eps2, np.array(q), np.array(p)) - Pc).max() < 1e-8

    def test_conjugate_momenta(self):
        c = chart([1, 0, 0], [1, 1, 0])
        assert np.allclose(om.conjugate_momenta(1, c), [0.5, 1, 0])


class TestMechanics:
    def test_free_hamiltonian_example(self):
        p = P("0,1,0")
        pt = om.chart_to_point(1, chart([1, 0, 0], [0, 1, 0]))
        assert om.free_hamiltonian(p, pt) == pytest.approx(1)
        mu = om.momentum_maps(p, pt)
        assert mu.norm_sq == pytest.approx(2)
        assert np.array_equal(mu.lam, pt.l_matrix)

    @settings(max_examples=25)
    @given(chart_coords, chart_coords, st.sampled_from([-1, 0, 0.5, 1]))
    def test_chart_form_of_hamiltonian(self, q, p, eps2):
        q, p = np.array(q), np.array(p)
        pt = om.chart_to_point(eps2, chart(q, p))
        expected = 0.5 * (p @ p + eps2 * ((p @ p) * (q @ q) - (q @ p) ** 2))
        H = om.free_hamiltonian(om.chart_params(3, eps2), pt)
        assert H == pytest.approx(expected, abs=1e-12)
        assert H == pytest.approx(0.5 * om.momentum_maps(pt.params, pt).norm_sq, abs=1e-12)

    def test_flat_flow_is_linear(self):
        p = P("0,0,0")
        q0, p0 = np.array([0.1, -0.2, 0.3]), np.array([0.5, 0.25, -1.0])
        traj = om.hamiltonian_flow(p, None, om.chart_to_point(0, chart(q0, p0)), T=2.0, dt=0.01)
        expected = q0 + traj.times[:, None] * p0
        assert np.abs(traj.chart_q() - expected).max() < 1e-12

    @pytest.mark.parametrize("eps2,p0", [(1, [0.5, 0.4, -0.3]), (-1, [0.15, 0.1, -0.1])])
    def test_short_run_conservation(self, eps2, p0):
        params = om.chart_params(3, eps2)
        pt = om.chart_to_point(eps2, chart([0.2, -0.1, 0.3], p0))
        traj = om.hamiltonian_flow(params, None, pt, T=2.0, dt=1e-3)
        assert max(traj.drift.values()) < 1e-10
        assert traj.residual_growth["angular"] < 1e-10
        assert om.affine_collinearity(traj) < 1e-8
        assert om.homogeneous_collinearity(traj) < 1e-8

    def test_bad_step(self):
        with pytest.raises(ParameterError):
            om.hamiltonian_flow(P("0,1,0"), None, om.DualPoint.from_parts(P("0,1,0"), I=1.0), T=1, dt=0)

    def test_csv(self):
        pt = om.chart_to_point(1, chart([0, 0, 0], [1, 0, 0]))
        traj = om.hamiltonian_flow(P("0,1,0"), None, pt, T=0.1, dt=0.01)
        rows = list(csv.reader(io.StringIO(traj.to_csv(every=3))))
        assert rows[0] == ["t", "I", "x_1", "x_2", "x_3", "p_1", "p_2", "p_3", "l_12", "l_13", "l_23", "H0", "K", "max_angular_residual"]
        assert [float(r[0]) for r in rows[1:]] == pytest.approx([0, 0.03, 0.06, 0.09, 0.1])

    def test_manifest(self):
        pt = om.DualPoint.from_parts(P("0,1,0"), I=1.0)
        man = om.run_manifest(P("0,1,0"), pt, 1.0, 0.1, seed=7)
        assert man["integrator"]["steps"] == 10 and man["seed"] == 7


class TestRank:
    def test_origin(self):
        assert om.poisson_rank(P("1,1,0"), np.zeros(10)) == 0

    def test_flat_base(self):
        assert om.poisson_rank(P("0,0,0"), om.DualPoint.from_parts(P("0,0,0"), I=1.0)) == 6

    @pytest.mark.parametrize("eps2", [0, 1, -1])
    def test_chart_points(self, eps2):
        rng = np.random.default_rng(11)
        for _ in range(10):
            pt = om.chart_to_point(eps2, chart(rng.uniform(-0.5, 0.5, 3), rng.normal(size=3)))
            assert om.poisson_rank(pt.params, pt) == 6

    def test_matches_dense_rank(self):
        rng = np.random.default_rng(5)
        T = oracles.structure_tensor(3, (1, 1, 0), dtype=float)
        for _ in range(10):
            xi = rng.normal(size=10)
            assert om.poisson_rank(P("1,1,0"), xi) == np.linalg.matrix_rank(np.einsum("abc,c->ab", T, xi))


class TestDegeneration:
    def sample(self, eps2, seed=0):
        rng = np.random.default_rng(seed)
        return [
            om.chart_to_point(eps2, chart(rng.uniform(-0.4, 0.4, 3), rng.normal(size=3)), branch)
            for branch in (1, -1)
            for _ in range(5)
        ]

    def test_sphere_case(self):
        rep = om.degeneration_structure(P("0,1,0"), self.sample(1))
        assert rep.fiber_dim == 3 and rep.base_residual <= 1e-10 and rep.base_variables == "I,x"

    def test_hyperbolic_case_two_components(self):
        rep = om.degeneration_structure(P("0,-1,0"), self.sample(-1))
        assert rep.components == [-1, 1] and rep.separated_by_I

    def test_off_cone_refused(self):
        with pytest.raises(ParameterError):
            om.degeneration_structure(P("1,1,0"), [])

    def test_flat_branches(self):
        pt = om.DualPoint.from_parts(P("0,0,0"), I=0.3, x=[1, 2, 3], p=[1, 1, 1])
        assert om.i_branches(P("0,0,0"), pt) == [-1.0, 1.0]

    @pytest.mark.parametrize("eps2", [1e-2, 1e-4])
    def test_flat_limit_first_order(self, eps2):
        c = chart([0.3, -0.2, 0.1], [0.5, 0.1, 0.7])
        Pc = om.chart_poisson_matrix(eps2, c)
        err = np.abs(Pc[:3, 3:] - np.eye(3)).max()
        assert err <= eps2 * np.dot(c.q, c.q) * (1 + 1e-9)
        dI, dl = om.flat_limit_defect(eps2, c)
        # l = q∧p while x∧p = I q∧p, so both defects are proportional to 1 - I = O(eps2)
        assert dI <= eps2 and dl <= eps2

    def test_exact_fraction_parameters(self):
        p = om.chart_params(3, 0.25)
        assert p.eps2 == Fraction(1, 4)
