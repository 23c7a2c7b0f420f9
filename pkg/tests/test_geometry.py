import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dplm.geometry import (
    BinGrid,
    SourceLocation,
    Trajectory,
    angle_to_bin,
    angular_separation_deg,
    azimuth_to_bin,
    bin_to_angle,
    elevation_to_bin,
    fold_front_back,
    haversine,
    sample_trajectory,
    wrap_azimuth,
)

azimuths = st.floats(-math.pi, math.pi, allow_nan=False)
elevations = st.floats(-math.pi / 2, math.pi / 2, allow_nan=False)
locations = st.builds(SourceLocation, azimuths, elevations)


class TestWrapAzimuth:
    def test_identity_inside_range(self):
        for a in [-3.0, -1.0, 0.0, 1.0, math.pi]:
            assert wrap_azimuth(a) == pytest.approx(a, abs=1e-15)

    def test_wraps_to_half_open_interval(self):
        assert wrap_azimuth(-math.pi) == pytest.approx(math.pi)
        assert wrap_azimuth(3 * math.pi) == pytest.approx(math.pi)
        assert wrap_azimuth(2 * math.pi) == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(-50.0, 50.0))
    def test_range_and_equivalence(self, a):
        w = wrap_azimuth(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


class TestSourceLocation:
    def test_range_validation(self):
        with pytest.raises(ValueError):
            SourceLocation(3.5)
        with pytest.raises(ValueError):
            SourceLocation(0.0, 2.0)

    def test_both_endpoints_allowed(self):
        SourceLocation(-math.pi)
        SourceLocation(math.pi)

    def test_from_degrees(self):
        loc = SourceLocation.from_degrees(-180.0, 45.0)
        # -180 wraps onto +pi, the same rear direction
        assert loc.azimuth == pytest.approx(math.pi)
        assert loc.elevation == pytest.approx(math.pi / 4)

    @given(locations)
    def test_unit_vector_round_trip(self, loc):
        v = loc.to_unit_vector()
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        back = SourceLocation.from_unit_vector(v)
        assert haversine(loc, back) < 1e-9

    def test_unit_vector_axes(self):
        np.testing.assert_allclose(SourceLocation(0.0).to_unit_vector(), [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(
            SourceLocation(math.pi / 2).to_unit_vector(), [0, 1, 0], atol=1e-15
        )
        np.testing.assert_allclose(
            SourceLocation(0.0, math.pi / 2).to_unit_vector(), [0, 0, 1], atol=1e-15
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            SourceLocation.from_unit_vector(np.zeros(3))


class TestBinGrid:
    def test_default_shape(self):
        grid = BinGrid()
        assert grid.n_azimuth == 50
        assert grid.n_elevation == 25
        assert grid.azimuth_width == pytest.approx(2 * math.pi / 50)

    def test_lower_edge_maps_to_bin_zero(self):
        grid = BinGrid()
        assert azimuth_to_bin(-math.pi, grid) == 0
        assert elevation_to_bin(-math.pi / 2, grid) == 0

    def test_upper_edge_clamps_to_last_bin(self):
        grid = BinGrid()
        assert azimuth_to_bin(math.pi, grid) == grid.n_azimuth - 1
        assert elevation_to_bin(math.pi / 2, grid) == grid.n_elevation - 1

    def test_boundary_belongs_to_upper_bin(self):
        grid = BinGrid(n_azimuth=4, n_elevation=2)
        # bins of width pi/2 starting at -pi; 0 is the edge between bins 1 and 2
        assert azimuth_to_bin(0.0, grid) == 2
        assert azimuth_to_bin(-1e-12, grid) == 1

    def test_centers_formula(self):
        grid = BinGrid(n_azimuth=4, n_elevation=2)
        np.testing.assert_allclose(
            grid.azimuth_centers(),
            [-3 * math.pi / 4, -math.pi / 4, math.pi / 4, 3 * math.pi / 4],
        )
        np.testing.assert_allclose(grid.elevation_centers(), [-math.pi / 4, math.pi / 4])

    @given(locations)
    def test_round_trip_within_half_width(self, loc):
        grid = BinGrid()
        az_bin, el_bin = angle_to_bin(loc, grid)
        center = bin_to_angle(az_bin, el_bin, grid)
        assert abs(center.azimuth - loc.azimuth) <= grid.azimuth_width / 2 + 1e-12
        assert abs(center.elevation - loc.elevation) <= grid.elevation_width / 2 + 1e-12

    @given(st.integers(0, 49), st.integers(0, 24))
    def test_center_maps_back_to_its_bin(self, az_bin, el_bin):
        grid = BinGrid()
        loc = bin_to_angle(az_bin, el_bin, grid)
        assert angle_to_bin(loc, grid) == (az_bin, el_bin)

    def test_bin_to_angle_range_check(self):
        with pytest.raises(ValueError):
            bin_to_angle(50, 0, BinGrid())


class TestFolding:
    def test_front_unchanged(self):
        assert fold_front_back(0.3) == pytest.approx(0.3)
        assert fold_front_back(-1.2) == pytest.approx(-1.2)

    def test_rear_reflects(self):
        assert fold_front_back(math.radians(170)) == pytest.approx(math.radians(10))
        assert fold_front_back(math.radians(-170)) == pytest.approx(math.radians(-10))
        assert fold_front_back(math.pi) == pytest.approx(0.0, abs=1e-12)

    @given(azimuths)
    def test_idempotent_and_in_range(self, a):
        f = fold_front_back(a)
        assert -math.pi / 2 <= f <= math.pi / 2
        assert fold_front_back(f) == pytest.approx(f, abs=1e-12)

    def test_array_form(self):
        arr = np.radians([170.0, -170.0, 30.0])
        np.testing.assert_allclose(np.degrees(fold_front_back(arr)), [10.0, -10.0, 30.0])


class TestHaversine:
    def test_identity_is_exactly_zero(self):
        loc = SourceLocation(0.7, -0.2)
        assert haversine(loc, loc) == 0.0

    def test_antipodal(self):
        assert haversine(SourceLocation(0.0), SourceLocation(math.pi)) == pytest.approx(
            math.pi, abs=1e-12
        )

    def test_quarter_circle(self):
        assert haversine(SourceLocation(0.0), SourceLocation(math.pi / 2)) == pytest.approx(
            math.pi / 2, abs=1e-12
        )
        assert haversine(
            SourceLocation(0.0, 0.0), SourceLocation(0.0, math.pi / 2)
        ) == pytest.approx(math.pi / 2, abs=1e-12)

    @given(locations, locations)
    def test_symmetry_and_range(self, p, q):
        d = haversine(p, q)
        assert 0.0 <= d <= math.pi + 1e-12
        assert d == haversine(q, p)

    @given(azimuths, azimuths)
    def test_equator_reduces_to_wrapped_difference(self, a1, a2):
        d = haversine(SourceLocation(a1), SourceLocation(a2))
        assert d == pytest.approx(abs(wrap_azimuth(a1 - a2)), abs=1e-9)

    def test_vector_angle_agreement(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = SourceLocation(rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi / 2, math.pi / 2))
            q = SourceLocation(rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi / 2, math.pi / 2))
            cos = float(np.dot(p.to_unit_vector(), q.to_unit_vector()))
            expected = math.acos(min(max(cos, -1.0), 1.0))
            assert haversine(p, q) == pytest.approx(expected, abs=1e-9)


class TestAngularSeparation:
    def test_numeric_arguments_are_degrees(self):
        assert angular_separation_deg(0.0, 90.0) == pytest.approx(90.0)
        assert angular_separation_deg(170.0, -170.0) == pytest.approx(20.0)

    def test_location_arguments(self):
        a = SourceLocation.from_degrees(10.0, 0.0)
        b = SourceLocation.from_degrees(10.0, 45.0)
        assert angular_separation_deg(a, b) == pytest.approx(45.0)


class TestTrajectory:
    def test_validation(self):
        loc = SourceLocation(0.0)
        with pytest.raises(ValueError):
            Trajectory(locations=(), duration_sec=1.0)
        with pytest.raises(ValueError):
            Trajectory(locations=((0.5, loc), (0.5, loc)), duration_sec=1.0)
        with pytest.raises(ValueError):
            Trajectory(locations=((0.0, loc), (2.0, loc)), duration_sec=1.0)

    def test_static_holds_location(self):
        loc = SourceLocation(0.4, 0.1)
        traj = Trajectory.static(loc, 2.0)
        for t in [0.0, 1.0, 2.0]:
            assert sample_trajectory(traj, t) == loc

    def test_linear_interpolation_on_equator(self):
        traj = Trajectory(
            locations=((0.0, SourceLocation(0.0)), (1.0, SourceLocation(1.0))),
            duration_sec=1.0,
        )
        for t in [0.0, 0.25, 0.5, 1.0]:
            assert sample_trajectory(traj, t).azimuth == pytest.approx(t, abs=1e-9)

    def test_endpoint_hold(self):
        traj = Trajectory(
            locations=((0.2, SourceLocation(0.5)), (0.8, SourceLocation(1.0))),
            duration_sec=1.0,
        )
        assert sample_trajectory(traj, 0.0).azimuth == pytest.approx(0.5)
        assert sample_trajectory(traj, 1.0).azimuth == pytest.approx(1.0)

    def test_out_of_range_time_rejected(self):
        traj = Trajectory.static(SourceLocation(0.0), 1.0)
        with pytest.raises(ValueError):
            sample_trajectory(traj, 1.5)
        with pytest.raises(ValueError):
            sample_trajectory(traj, -0.1)

    def test_scalar_and_sequence_forms(self):
        traj = Trajectory(
            locations=((0.0, SourceLocation(0.0)), (1.0, SourceLocation(1.0))),
            duration_sec=1.0,
        )
        one = sample_trajectory(traj, 0.5)
        many = sample_trajectory(traj, [0.0, 0.5, 1.0])
        assert isinstance(many, list) and len(many) == 3
        assert many[1] == one

    def test_shorter_arc_is_used(self):
        traj = Trajectory(
            locations=(
                (0.0, SourceLocation.from_degrees(170.0)),
                (1.0, SourceLocation.from_degrees(-170.0)),
            ),
            duration_sec=1.0,
        )
        mid = sample_trajectory(traj, 0.5)
        # crossing the rear seam, not the long way through the front
        assert abs(mid.azimuth) == pytest.approx(math.pi, abs=1e-9)

    def test_antipodal_keyframes_rejected(self):
        traj = Trajectory(
            locations=(
                (0.0, SourceLocation(0.0)),
                (1.0, SourceLocation(math.pi)),
            ),
            duration_sec=1.0,
        )
        with pytest.raises(ValueError):
            sample_trajectory(traj, 0.5)
