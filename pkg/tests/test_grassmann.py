import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from phasedeform import grassmann as gr
from phasedeform.lie_core import DeformationParams, ParameterError, g_labels
from phasedeform.orbit_mech import ChartPoint, OrbitSpec, chart_to_point, orbit_residuals


def unit(m, *idx):
    v = np.zeros(m)
    for i in idx:
        v[i - 1] = 1
    return v


def named(b, n=3):
    """Coordinates keyed by basis label, via the relabeling v_{n+1} -> x, v_{n+2} -> p."""
    return {str(lab): v for lab, v in zip(g_labels(n), b.values) if v}


vectors = st.lists(st.floats(-3, 3), min_size=5, max_size=5)


class TestPlucker:
    def test_coordinate_plane(self):
        b = gr.plucker(gr.OrientedPlane(unit(5, 4), unit(5, 5)))
        assert named(b) == {"I": 1}

    def test_mixed_plane(self):
        b = gr.plucker(gr.OrientedPlane(unit(5, 1, 4), unit(5, 2, 5)))
        assert named(b) == {"l12": 1, "p1": 1, "x2": -1, "I": 1}
        assert b.I * b.l(1, 2) == b.l(1, 4) * b.l(2, 5) - b.l(2, 4) * b.l(1, 5)

    def test_normalize_outside_chart(self):
        with pytest.raises(gr.OutsideChartError):
            gr.plucker(gr.OrientedPlane(unit(5, 1), unit(5, 2)), normalize=True)

    def test_dependent_vectors_rejected(self):
        with pytest.raises(ParameterError):
            gr.OrientedPlane((1, 2, 3, 4, 5), (2, 4, 6, 8, 10))

    @settings(max_examples=50)
    @given(vectors, vectors)
    def test_against_minor_oracle(self, u, v):
        try:
            plane = gr.OrientedPlane(u, v)
        except ParameterError:
            return
        L = gr.plucker(plane).matrix()
        for (a, b), m in oracles.minors(u, v).items():
            assert L[a - 1, b - 1] == pytest.approx(m, abs=1e-12)

    def test_non_decomposable_residual(self):
        L = np.zeros((5, 5))
        L[0, 1], L[2, 3] = 1, 1
        L = L - L.T
        assert gr.plucker_residuals(gr.BivectorCoords.from_matrix(L)) == 1

    def test_orbit_points_satisfy_plucker(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            pt = chart_to_point(0, ChartPoint(tuple(rng.normal(size=3)), tuple(rng.normal(size=3))))
            assert gr.plucker_residuals(gr.BivectorCoords.from_dual_point(pt)) <= 1e-12


class TestInverse:
    def test_unit_point(self):
        b = gr.BivectorCoords(3, unit(10, 10))
        plane = gr.point_to_plane(b)
        assert plane.same_oriented_subspace(gr.OrientedPlane(unit(5, 4), unit(5, 5)))

    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            b = gr.plucker(gr.random_plane(3, rng, min_abs_I=0.05), normalize=True)
            back = gr.plucker(gr.point_to_plane(b), normalize=True)
            assert np.abs(back.values - b.values).max() <= 1e-10
            assert np.sign(back.I) == np.sign(b.I)

    def test_sign_flip_gives_opposite_orientation(self):
        rng = np.random.default_rng(1)
        b = gr.plucker(gr.random_plane(3, rng, min_abs_I=0.1), normalize=True)
        p1 = gr.point_to_plane(b)
        p2 = gr.point_to_plane(gr.BivectorCoords(3, -b.values))
        assert p1.same_oriented_subspace(p2.flipped())
        assert not p1.same_oriented_subspace(p2)

    def test_errors(self):
        with pytest.raises(gr.OutsideChartError):
            gr.point_to_plane(gr.BivectorCoords(3, unit(10, 1)))
        L = np.zeros((5, 5))
        L[0, 1], L[2, 3], L[3, 4] = 1, 1, 1
        with pytest.raises(gr.NotDecomposableError):
            gr.point_to_plane(gr.BivectorCoords.from_matrix(L - L.T))
        with pytest.raises(gr.NotDecomposableError):
            gr.point_to_plane(gr.BivectorCoords(3, np.zeros(10)))


class TestInvariance:
    def test_flip_negates_exactly(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            plane = gr.random_plane(3, rng)
            assert np.array_equal(gr.plucker(plane.flipped()).values, -gr.plucker(plane).values)

    @settings(max_examples=40)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_det_one_change_of_basis(self, a, b, c):
        if abs(a) < 0.1:
            return
        d = (1 + b * c) / a  # [[a, b], [c, d]] has determinant 1
        rng = np.random.default_rng(8)
        plane = gr.random_plane(3, rng, min_abs_I=0.1)
        u, v = np.array(plane.u), np.array(plane.v)
        other = gr.OrientedPlane(a * u + b * v, c * u + d * v)
        assert np.abs(gr.plucker(other, normalize=True).values - gr.plucker(plane, normalize=True).values).max() <= 1e-12


class TestBridge:
    def test_compact_orbit_from_planes(self):
        params = DeformationParams.of(3, "1,1,0")
        spec = OrbitSpec(params)
        rng = np.random.default_rng(6)
        for _ in range(50):
            pt = gr.plane_to_orbit_point(gr.random_plane(3, rng), params)
            assert orbit_residuals(spec, pt).max() <= 1e-10

    def test_normalized_coordinates_sit_above_level_one(self):
        # with I = ±1 the compact Casimir equals |b|^2 >= 1, hence the rescaling above
        params = DeformationParams.of(3, "1,1,0")
        rng = np.random.default_rng(7)
        b = gr.plucker(gr.random_plane(3, rng, min_abs_I=0.1), normalize=True)
        assert orbit_residuals(OrbitSpec(params), b.as_dual_point(params)).casimir >= 0

    def test_no_real_rescaling(self):
        with pytest.raises(ParameterError):
            # only x1 = 1 is nonzero, and K = I^2 - x^2 - p^2 + l^2 is negative there
            gr.plane_to_orbit_point(gr.OrientedPlane(unit(5, 1), unit(5, 4)), DeformationParams.of(3, "-1,-1,0"))
