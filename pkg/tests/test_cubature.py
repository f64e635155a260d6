import math

import numpy as np
import pytest

from stppfit import (
    CubatureScheme,
    CubatureWarning,
    GridResolution,
    MarkedPointPattern,
    PointPattern,
    SpaceTimePoint,
    Window,
    approximate_integral,
    build_replicated_scheme,
    build_scheme,
    cube_index,
    generate_dummy_grid,
    replicated_responses,
    responses,
)

UNIT = Window.unit_cube()


def reference_cell_id(window, res, p):
    """Independent binning: plain floor arithmetic, boundary up, clamped top."""
    ids = []
    for (lo, hi), n, v in zip(window.ranges, res.per_axis, p.as_tuple()):
        i = math.floor((v - lo) * n / (hi - lo))
        ids.append(min(max(i, 0), n - 1))
    return ids[0] + res.nx * (ids[1] + res.ny * ids[2])


def reference_weights(window, res, points):
    """Hand version of the weight rule: cell volume over shared-cell count."""
    centers = [p for p in generate_dummy_grid(window, res)]
    everyone = list(points) + centers
    counts = {}
    for p in everyone:
        counts[reference_cell_id(window, res, p)] = counts.get(reference_cell_id(window, res, p), 0) + 1
    nu = window.volume() / res.n_cells
    return [nu / counts[reference_cell_id(window, res, p)] for p in everyone]


class TestGridResolution:
    def test_valid(self):
        res = GridResolution(2, 3, 4)
        assert res.n_cells == 24
        assert res.cell_volume(UNIT) == pytest.approx(1 / 24)

    @pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1), (1, 1, 1.5)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            GridResolution(*bad)


class TestDummyGrid:
    def test_single_cell_center(self):
        (p,) = generate_dummy_grid(UNIT, GridResolution(1, 1, 1))
        assert p.as_tuple() == (0.5, 0.5, 0.5)

    def test_two_cells_along_x(self):
        pts = generate_dummy_grid(UNIT, GridResolution(2, 1, 1))
        assert [p.as_tuple() for p in pts] == [(0.25, 0.5, 0.5), (0.75, 0.5, 0.5)]

    def test_box_of_side_two(self):
        pts = generate_dummy_grid(Window.from_bounds(0, 2, 0, 2, 0, 2), GridResolution(2, 2, 2))
        assert len(pts) == 8
        for p in pts:
            assert all(c in (0.5, 1.5) for c in p.as_tuple())

    def test_row_major_x_fastest_order(self):
        pts = generate_dummy_grid(UNIT, GridResolution(2, 2, 2))
        xs = [p.x for p in pts]
        assert xs == [0.25, 0.75] * 4
        assert [p.t for p in pts[:4]] == [0.25] * 4


class TestCubeIndex:
    def test_first_octant(self):
        assert cube_index(UNIT, GridResolution(2, 2, 2), SpaceTimePoint(0.1, 0.1, 0.1)) == 0

    def test_upper_corner_clamped_to_last_cell(self):
        assert cube_index(UNIT, GridResolution(2, 2, 2), SpaceTimePoint(1.0, 1.0, 1.0)) == 7

    def test_interior_boundary_goes_up(self):
        assert cube_index(UNIT, GridResolution(2, 2, 2), SpaceTimePoint(0.5, 0.1, 0.1)) == 1

    def test_outside_names_coordinate(self):
        with pytest.raises(ValueError, match="coordinate t"):
            cube_index(UNIT, GridResolution(2, 2, 2), SpaceTimePoint(0.5, 0.5, -0.1))

    def test_matches_reference_on_random_points(self):
        rng = np.random.default_rng(123)
        window = Window.from_bounds(-1, 3, 0, 2, 5, 9)
        res = GridResolution(7, 3, 5)
        for _ in range(200):
            p = SpaceTimePoint(*(lo + rng.random() * (hi - lo) for lo, hi in window.ranges))
            assert cube_index(window, res, p) == reference_cell_id(window, res, p)


class TestBuildScheme:
    def test_empty_pattern_all_dummies_equal_weight(self):
        scheme = build_scheme(PointPattern(UNIT), GridResolution(2, 2, 2))
        assert scheme.n_data == 0 and scheme.n_dummy == 8
        np.testing.assert_array_equal(scheme.weights, np.full(8, 0.125))

    def test_single_data_point_shares_its_cell(self):
        pat = PointPattern(UNIT, (SpaceTimePoint(0.1, 0.1, 0.1),))
        with pytest.warns(CubatureWarning):
            scheme = build_scheme(pat, GridResolution(1, 1, 1))
        np.testing.assert_array_equal(scheme.weights, [0.5, 0.5])
        assert scheme.weights.sum() == pytest.approx(1.0, abs=0)

    def test_five_points_in_one_cell_hand_enumeration(self):
        # five data points inside the first octant of a 2x2x2 partition
        rng = np.random.default_rng(77)
        pts = tuple(SpaceTimePoint(*(0.45 * rng.random(3))) for _ in range(5))
        pat = PointPattern(UNIT, pts)
        scheme = build_scheme(pat, GridResolution(2, 2, 2))
        expected = reference_weights(UNIT, GridResolution(2, 2, 2), pts)
        np.testing.assert_allclose(scheme.weights, expected, rtol=0, atol=0)
        # crowded cell: 5 data + 1 dummy, each nu / 6
        crowded = [w for w in scheme.weights if w != 0.125]
        assert crowded == [0.125 / 6] * 6
        assert abs(scheme.weights.sum() - 1.0) < 1e-12

    def test_data_points_come_first(self):
        pat = PointPattern(UNIT, (SpaceTimePoint(0.9, 0.9, 0.9),))
        scheme = build_scheme(pat, GridResolution(2, 2, 2))
        np.testing.assert_array_equal(scheme.is_data, [1] + [0] * 8)
        np.testing.assert_array_equal(scheme.coords[0], [0.9, 0.9, 0.9])

    def test_warns_when_dummies_do_not_outnumber_data(self):
        rng = np.random.default_rng(4)
        pat = PointPattern.from_arrays(UNIT, *rng.random((3, 9)))
        with pytest.warns(CubatureWarning, match="dummy"):
            build_scheme(pat, GridResolution(2, 2, 2))

    def test_warns_on_duplicate_points(self):
        p = SpaceTimePoint(0.3, 0.3, 0.3)
        with pytest.warns(CubatureWarning, match="coincident"):
            build_scheme(PointPattern(UNIT, (p, p)), GridResolution(3, 3, 3))

    def test_weights_match_reference_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(10):
            window = Window.from_bounds(0, 1 + rng.random(), -rng.random(), 1, 2, 3 + rng.random())
            res = GridResolution(*rng.integers(1, 6, size=3))
            n = int(rng.integers(0, 30))
            pts = tuple(
                SpaceTimePoint(*(lo + rng.random() * (hi - lo) for lo, hi in window.ranges))
                for _ in range(n)
            )
            pat = PointPattern(window, pts)
            if res.n_cells <= n:
                with pytest.warns(CubatureWarning):
                    scheme = build_scheme(pat, res)
            else:
                scheme = build_scheme(pat, res)
            np.testing.assert_allclose(
                scheme.weights, reference_weights(window, res, pts), rtol=1e-15
            )
            vol = window.volume()
            assert abs(scheme.weights.sum() - vol) <= 1e-10 * vol

    def test_determinism_byte_identical(self):
        rng = np.random.default_rng(5)
        pat = PointPattern.from_arrays(UNIT, *rng.random((3, 40)))
        a = build_scheme(pat, GridResolution(4, 4, 4))
        b = build_scheme(pat, GridResolution(4, 4, 4))
        assert a.coords.tobytes() == b.coords.tobytes()
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.is_data.tobytes() == b.is_data.tobytes()

    def test_partition_counts_cover_all_points(self):
        rng = np.random.default_rng(6)
        pat = PointPattern.from_arrays(UNIT, *rng.random((3, 25)))
        res = GridResolution(3, 3, 3)
        scheme = build_scheme(pat, res)
        ids = [cube_index(UNIT, res, SpaceTimePoint(*c)) for c in scheme.coords]
        assert len(ids) == scheme.size
        assert all(0 <= i < res.n_cells for i in ids)


class TestSchemeInvariants:
    def test_weight_sum_violation_rejected(self):
        coords = np.array([[0.5, 0.5, 0.5]])
        with pytest.raises(ValueError, match="window volume"):
            CubatureScheme(UNIT, GridResolution(1, 1, 1), coords, [0], [0.5], 0, 1)

    def test_nonpositive_weight_rejected(self):
        coords = np.array([[0.25, 0.5, 0.5], [0.75, 0.5, 0.5]])
        with pytest.raises(ValueError, match="positive"):
            CubatureScheme(UNIT, GridResolution(2, 1, 1), coords, [0, 0], [1.0, 0.0], 0, 2)

    def test_indicator_count_must_match_n_data(self):
        coords = np.array([[0.25, 0.5, 0.5], [0.75, 0.5, 0.5]])
        with pytest.raises(ValueError, match="n_data"):
            CubatureScheme(UNIT, GridResolution(2, 1, 1), coords, [1, 0], [0.5, 0.5], 0, 2)

    def test_responses_times_weights_recover_indicators(self):
        rng = np.random.default_rng(8)
        pat = PointPattern.from_arrays(UNIT, *rng.random((3, 30)))
        scheme = build_scheme(pat, GridResolution(4, 4, 4))
        y = responses(scheme)
        np.testing.assert_allclose(y * scheme.weights, scheme.is_data, atol=1e-12)


class TestResponses:
    def test_dummy_gives_zero(self):
        scheme = build_scheme(PointPattern(UNIT), GridResolution(2, 2, 2))
        np.testing.assert_array_equal(responses(scheme), np.zeros(8))

    def test_data_point_inverse_weight(self):
        pat = PointPattern(UNIT, (SpaceTimePoint(0.1, 0.1, 0.1),))
        with pytest.warns(CubatureWarning):
            scheme = build_scheme(pat, GridResolution(1, 1, 1))
        assert responses(scheme)[0] == 2.0

    def test_crowded_cell_response(self):
        rng = np.random.default_rng(77)
        pts = tuple(SpaceTimePoint(*(0.45 * rng.random(3))) for _ in range(5))
        scheme = build_scheme(PointPattern(UNIT, pts), GridResolution(2, 2, 2))
        # weight nu/6 = 0.125/6, response 6/0.125 = 48
        np.testing.assert_allclose(responses(scheme)[:5], np.full(5, 48.0))


class TestApproximateIntegral:
    def test_constant_integrates_to_volume_exactly(self):
        window = Window.from_bounds(0, 2, 0, 3, 0, 5)
        scheme = build_scheme(PointPattern(window), GridResolution(3, 2, 4))
        got = approximate_integral(scheme, lambda x, y, t: np.full_like(x, 7.0))
        assert got == pytest.approx(7.0 * 30.0, rel=1e-12)

    def test_exponential_against_analytic_value(self):
        # integral of exp(2 + x) over the unit cube is e^2 (e - 1)
        true = math.exp(2.0) * (math.e - 1.0)
        scheme = build_scheme(PointPattern(UNIT), GridResolution(20, 20, 20))
        got = approximate_integral(scheme, lambda x, y, t: np.exp(2.0 + x))
        assert abs(got - true) / true < 0.005

    def test_single_cell_indicator_gives_cell_volume(self):
        res = GridResolution(2, 2, 2)
        scheme = build_scheme(PointPattern(UNIT), res)

        def indicator(x, y, t):
            return ((x < 0.5) & (y < 0.5) & (t < 0.5)).astype(float)

        assert approximate_integral(scheme, indicator) == pytest.approx(0.125, rel=1e-12)

    def test_error_ladder_non_increasing(self):
        a, b, c, d = 2.0, 1.0, 0.5, -0.3
        true = (
            math.exp(a)
            * ((math.exp(b) - 1) / b)
            * ((math.exp(c) - 1) / c)
            * ((math.exp(d) - 1) / d)
        )
        errors = []
        for r in (5, 10, 20, 40):
            scheme = build_scheme(PointPattern(UNIT), GridResolution(r, r, r))
            got = approximate_integral(scheme, lambda x, y, t: np.exp(a + b * x + c * y + d * t))
            errors.append(abs(got - true))
        for e1, e2 in zip(errors, errors[1:]):
            assert e2 <= e1 + 1e-12

    def test_nonfinite_integrand_names_point(self):
        scheme = build_scheme(PointPattern(UNIT), GridResolution(2, 1, 1))

        def bad(x, y, t):
            return np.where(x > 0.5, np.inf, 1.0)

        with pytest.raises(ValueError, match="0.75"):
            approximate_integral(scheme, bad)


def marked_pattern(n_a=3, n_b=2, seed=31):
    rng = np.random.default_rng(seed)
    pts = [(SpaceTimePoint(*rng.random(3)), "A") for _ in range(n_a)]
    pts += [(SpaceTimePoint(*rng.random(3)), "B") for _ in range(n_b)]
    return MarkedPointPattern.from_labeled(UNIT, pts)


class TestReplicatedScheme:
    def test_single_level_collapses_to_plain_scheme(self):
        rng = np.random.default_rng(13)
        pts = [(SpaceTimePoint(*rng.random(3)), "only") for _ in range(4)]
        pat = MarkedPointPattern.from_labeled(UNIT, pts)
        rep = build_replicated_scheme(pat, GridResolution(3, 3, 3))
        from stppfit import ground_pattern

        plain = build_scheme(ground_pattern(pat), GridResolution(3, 3, 3))
        np.testing.assert_array_equal(rep.weights_by_level[0], plain.weights)
        np.testing.assert_array_equal(rep.is_data_by_level[0], plain.is_data)
        np.testing.assert_array_equal(rep.coords, plain.coords)

    def test_indicators_single_a_point(self):
        pat = MarkedPointPattern.from_labeled(
            UNIT,
            [(SpaceTimePoint(0.3, 0.3, 0.3), "A"), (SpaceTimePoint(0.8, 0.8, 0.8), "B")],
        )
        rep = build_replicated_scheme(pat, GridResolution(2, 2, 2))
        a_row = rep.is_data_by_level[0]
        b_row = rep.is_data_by_level[1]
        assert a_row[0] == 1 and b_row[0] == 0  # the A data location
        assert a_row[1] == 0 and b_row[1] == 1  # the B data location
        assert a_row[2:].sum() == 0 and b_row[2:].sum() == 0

    def test_per_level_weight_sums_and_hand_rule(self):
        pat = marked_pattern(3, 2)
        res = GridResolution(2, 2, 2)
        rep = build_replicated_scheme(pat, res)
        locations = [p for p, _ in pat.points]
        expected = reference_weights(UNIT, res, locations)
        for row in rep.weights_by_level:
            assert abs(row.sum() - 1.0) <= 1e-10
            np.testing.assert_allclose(row, expected, rtol=1e-15)

    def test_levels_share_locations(self):
        pat = marked_pattern(4, 6)
        rep = build_replicated_scheme(pat, GridResolution(3, 3, 3))
        assert rep.coords.shape == (10 + 27, 3)
        assert rep.n_ground == 10 and rep.n_dummy == 27
        assert rep.n_by_level() == {rep.levels[0]: 4, rep.levels[1]: 6}

    def test_replicated_responses(self):
        pat = marked_pattern(2, 3)
        rep = build_replicated_scheme(pat, GridResolution(2, 2, 2))
        y = replicated_responses(rep)
        np.testing.assert_allclose(
            y * rep.weights_by_level, rep.is_data_by_level, atol=1e-12
        )


class TestImmutability:
    def test_scheme_arrays_are_read_only(self):
        scheme = build_scheme(PointPattern(UNIT), GridResolution(2, 2, 2))
        for arr in (scheme.coords, scheme.weights, scheme.is_data):
            with pytest.raises(ValueError):
                arr[0] = 0

    def test_replicated_arrays_are_read_only(self):
        pat = marked_pattern(2, 2)
        rep = build_replicated_scheme(pat, GridResolution(2, 2, 2))
        for arr in (rep.coords, rep.weights_by_level, rep.is_data_by_level):
            with pytest.raises(ValueError):
                arr.flat[0] = 0

    def test_frozen_dataclasses(self):
        scheme = build_scheme(PointPattern(UNIT), GridResolution(2, 2, 2))
        with pytest.raises(AttributeError):
            scheme.n_data = 5
        with pytest.raises(AttributeError):
            GridResolution(1, 1, 1).nx = 2
