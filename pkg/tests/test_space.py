"""Balls, volumes, the D-weight and the fitted doubling geometry."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatbesov.errors import DomainError
from heatbesov.space import (
    MetricMeasureSpace,
    ball_volume,
    cycle_space,
    d_weight,
    d_weight_matrix,
    default_radius_grid,
    fit_geometry,
    grid_space,
    path_space,
    random_geometric_space,
    read_edge_list,
    read_weights,
    rescale_metric,
    single_point_space,
    space_from_edges,
    space_from_files,
)


# ------------------------------------------------------------ ball volumes


def test_ball_below_min_distance_is_the_point(path64):
    sp = path64.space
    for x in (0, 17, 63):
        assert ball_volume(sp, x, 0.5 * sp.min_distance) == sp.measure[x]


def test_ball_beyond_diameter_is_everything(grid8):
    sp = grid8.space
    assert ball_volume(sp, 5, 1.01 * sp.diameter) == pytest.approx(sp.total_measure, rel=1e-15)


def test_ball_volume_hand_enumeration():
    # [DERIVED] middle point of a unit-spaced 3-path with weights (1, 2, 3):
    # every point lies within 1 < 1.5, so the ball holds 1 + 2 + 3.
    sp = MetricMeasureSpace([[0, 1, 2], [1, 0, 1], [2, 1, 0]], [1, 2, 3])
    assert ball_volume(sp, 1, 1.5) == 6.0


def test_balls_are_strict():
    sp = path_space(3, measure="unit")
    assert ball_volume(sp, 0, 1.0) == 1.0
    assert ball_volume(sp, 0, 1.0 + 1e-12) == 2.0


def test_ball_volume_rejects_bad_input(path3):
    with pytest.raises(DomainError):
        ball_volume(path3.space, 3, 1.0)
    with pytest.raises(DomainError):
        ball_volume(path3.space, 0, 0.0)


@given(x=st.integers(0, 63), r1=st.floats(1e-3, 2.0), r2=st.floats(1e-3, 2.0))
def test_ball_volume_monotone(path64, x, r1, r2):
    lo, hi = sorted((r1, r2))
    assert ball_volume(path64.space, x, lo) <= ball_volume(path64.space, x, hi)


def test_vectorized_volumes_match_scalar(grid8):
    sp = grid8.space
    for r in (0.1, 0.3, 0.75):
        expected = [ball_volume(sp, x, r) for x in range(sp.size)]
        np.testing.assert_allclose(sp.volumes(r), expected, rtol=1e-15)


# ---------------------------------------------------------------- D-weight


def test_d_weight_on_diagonal(path64):
    sp = path64.space
    assert d_weight(sp, 0.1, 3.0, 7, 7) == pytest.approx(1 / ball_volume(sp, 7, 0.1), rel=1e-15)


def test_d_weight_without_decay(path64):
    sp = path64.space
    expected = (ball_volume(sp, 3, 0.2) * ball_volume(sp, 40, 0.2)) ** -0.5
    assert d_weight(sp, 0.2, 0.0, 3, 40) == pytest.approx(expected, rel=1e-15)


def test_d_weight_two_points_by_hand():
    # [DERIVED] distance 1 is not < 1, so both unit balls are singletons of
    # mass 1 and D = (1 * 1)^(-1/2) (1 + 1/1)^(-2) = 1/4.
    sp = path_space(2, measure="unit")
    assert d_weight(sp, 1.0, 2.0, 0, 1) == pytest.approx(0.25, rel=1e-15)


@given(t=st.floats(1e-2, 2.0), sigma=st.floats(0.0, 6.0), x=st.integers(0, 63), y=st.integers(0, 63))
def test_d_weight_symmetric(path64, t, sigma, x, y):
    sp = path64.space
    assert d_weight(sp, t, sigma, x, y) == d_weight(sp, t, sigma, y, x)


def test_d_weight_matrix_matches_pointwise(grid8):
    sp = grid8.space
    mat = d_weight_matrix(sp, 0.3, 2.5)
    for x, y in [(0, 0), (0, 63), (10, 20), (33, 7)]:
        assert mat[x, y] == pytest.approx(d_weight(sp, 0.3, 2.5, x, y), rel=1e-14)


# ---------------------------------------------------------------- geometry


def test_single_point_profile():
    geom = fit_geometry(single_point_space())
    assert geom.c0 == 1.0
    assert geom.n == 0.0
    assert geom.degenerate


def test_path64_dimension():
    # [DERIVED] exhaustive doubling ratios on the unit-weight path
    geom = fit_geometry(path_space(64, measure="unit"), [1, 2, 4, 8])
    assert 0.8 <= geom.n <= 1.3


def test_grid16_dimension():
    # [DERIVED] exhaustive doubling ratios on the l1 lattice
    geom = fit_geometry(grid_space(16))
    assert 1.7 <= geom.n <= 2.3


def test_profile_invariants(path64, grid8):
    for geom in (path64.geom, grid8.geom):
        assert geom.c0 >= 1
        assert 0 <= geom.n_prime <= geom.n
        assert geom.c1 > 0
        assert geom.c2 > 1
        assert geom.n == pytest.approx(math.log2(geom.c0), rel=1e-15)


def test_scaling_constant_covers_grid(path64):
    sp, geom = path64.space, path64.geom
    grid = np.asarray(geom.radius_grid)
    for i in range(grid.size):
        for j in range(i, grid.size):
            lam = grid[j] / grid[i]
            big = sp.volumes(grid[j] * (1 + 1e-9), closed=True)
            small = sp.volumes(grid[i] * (1 + 1e-9), closed=True)
            assert np.all(big <= geom.scaling_constant * lam**geom.n * small * (1 + 1e-12))


def test_default_radius_grid_is_dyadic(path64):
    grid = default_radius_grid(path64.space)
    assert grid[0] == path64.space.min_distance
    np.testing.assert_allclose(grid[1:] / grid[:-1], 2.0)
    assert grid[-1] <= path64.space.diameter


def test_fit_geometry_rejects_bad_grid(path3):
    with pytest.raises(DomainError):
        fit_geometry(path3.space, [])
    with pytest.raises(DomainError):
        fit_geometry(path3.space, [-1.0])
    with pytest.raises(DomainError):
        fit_geometry(path3.space, [10.0])


# --------------------------------------------------------- metric validation


def test_metric_validation():
    with pytest.raises(DomainError):
        MetricMeasureSpace([[0, 1], [2, 0]], [1, 1])
    with pytest.raises(DomainError):
        MetricMeasureSpace([[0, 0], [0, 0]], [1, 1])
    with pytest.raises(DomainError):
        MetricMeasureSpace([[0, 1, 5], [1, 0, 1], [5, 1, 0]], [1, 1, 1])
    with pytest.raises(DomainError):
        MetricMeasureSpace([[0, 1], [1, 0]], [1, 0])


# --------------------------------------------------------------- generators


def test_path_discretises_the_interval():
    sp = path_space(11, spacing=0.1)
    assert sp.diameter == pytest.approx(1.0)
    np.testing.assert_allclose(sp.measure, 0.1)
    assert all(w == pytest.approx(10.0) for *_, w in sp.edges)


def test_degree_measure():
    sp = path_space(4, measure="degree")
    np.testing.assert_allclose(sp.measure, [1, 2, 2, 1])


def test_cycle_metric_wraps():
    sp = cycle_space(8, spacing=0.5)
    assert sp.metric[0, 7] == 0.5
    assert sp.diameter == 2.0
    with pytest.raises(DomainError):
        cycle_space(2)


def test_grid_uses_l1_metric():
    sp = grid_space(3, 4, spacing=0.5)
    assert sp.size == 12
    assert sp.diameter == pytest.approx(0.5 * (2 + 3))


def test_random_geometric_is_seeded_and_connected():
    a = random_geometric_space(30, radius=0.2, seed=4)
    b = random_geometric_space(30, radius=0.2, seed=4)
    np.testing.assert_array_equal(a.metric, b.metric)
    assert np.all(np.isfinite(a.metric))


def test_edges_define_shortest_path_metric():
    sp = space_from_edges([(0, 1, 2.0), (1, 2, 0.5)], [1, 1, 1])
    assert sp.metric[0, 2] == pytest.approx(0.5 + 2.0)
    with pytest.raises(DomainError):
        space_from_edges([(0, 1, -1.0)], [1, 1])
    with pytest.raises(DomainError):
        space_from_edges([(0, 1, 1.0)], [1, 1, 1])


def test_space_from_files(tmp_path):
    (tmp_path / "e.txt").write_text("# u v w\n0 1 1.0\n1 2 1.0\n\n2 3 2.0\n")
    (tmp_path / "w.txt").write_text("3 4.0\n0 1.0\n1 2.0\n2 3.0\n")
    sp = space_from_files(tmp_path / "e.txt", tmp_path / "w.txt")
    np.testing.assert_allclose(sp.measure, [1, 2, 3, 4])
    assert sp.metric[0, 3] == pytest.approx(2.5)
    assert len(read_edge_list(tmp_path / "e.txt")) == 3


def test_malformed_files_name_the_line(tmp_path):
    (tmp_path / "e.txt").write_text("0 1 1.0\n0 1\n")
    with pytest.raises(DomainError, match=":2:"):
        read_edge_list(tmp_path / "e.txt")
    (tmp_path / "w.txt").write_text("0 1.0\n0 2.0\n")
    with pytest.raises(DomainError, match="repeated"):
        read_weights(tmp_path / "w.txt")


def test_rescale_metric(path3):
    sp = rescale_metric(path3.space, 4.0)
    assert sp.diameter == 8.0
    np.testing.assert_array_equal(sp.measure, path3.space.measure)
    with pytest.raises(DomainError):
        rescale_metric(path3.space, 0.0)
