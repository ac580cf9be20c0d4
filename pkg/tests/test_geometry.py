import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlpgnav.geometry import (FovSector, GridIndexError, OccupancyGrid, Pose2D,
                              _batch_visible, cells_in_fov, clearance_field,
                              fov_overlap_area, normalize_angle, raycast)

import oracles


@given(st.floats(-100.0, 100.0, allow_nan=False))
def test_normalize_angle_range_and_equivalence(theta):
    w = normalize_angle(theta)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


def test_pose_theta_normalized_on_construction():
    assert Pose2D(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    assert Pose2D(0, 0, -math.pi).theta == pytest.approx(math.pi)


def test_bearing_to_axes():
    p = Pose2D(1.0, 1.0, 0.0)
    assert p.bearing_to(2.0, 1.0) == pytest.approx(0.0)
    assert p.bearing_to(1.0, 2.0) == pytest.approx(math.pi / 2)
    assert Pose2D(0, 0, math.pi / 2).bearing_to(0.0, 5.0) == pytest.approx(0.0)


def test_fov_sector_validation():
    with pytest.raises(ValueError):
        FovSector(Pose2D(0, 0, 0), half_angle=0.0)
    with pytest.raises(ValueError):
        FovSector(Pose2D(0, 0, 0), half_angle=2.0)
    with pytest.raises(ValueError):
        FovSector(Pose2D(0, 0, 0), range_m=0.0)


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(-math.pi, math.pi),
       st.floats(0.2, math.pi / 2), st.floats(0.5, 4.0),
       st.floats(-5, 5), st.floats(-5, 5))
def test_sector_membership_matches_definition(ax, ay, at, half, rng, x, y):
    fov = FovSector(Pose2D(ax, ay, at), half, rng)
    # apex theta is normalized by Pose2D; oracle must see the same angle
    expect = oracles.sector_contains(fov.apex.x, fov.apex.y, fov.apex.theta,
                                     half, rng, x, y)
    assert fov.contains_point(x, y) == expect


def _random_grid(rng, w=20, h=20, res=0.25, density=0.15):
    occ = rng.random((w, h)) < density
    return OccupancyGrid(w, h, res, occupancy=occ)


def test_grid_coordinate_round_trip():
    g = OccupancyGrid(10, 8, 0.5, origin_x=-1.0, origin_y=2.0)
    cx, cy = g.cell_center(3, 4)
    assert g.world_to_cell(cx, cy) == (3, 4)
    with pytest.raises(GridIndexError):
        g.world_to_cell(100.0, 0.0)
    with pytest.raises(GridIndexError):
        g.cell_center(-1, 0)


def test_grid_png_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    g = _random_grid(rng)
    g.origin_x, g.origin_y = -2.5, 1.25
    path = tmp_path / "grid.png"
    g.save(path)
    loaded = OccupancyGrid.load(path)
    assert np.array_equal(loaded.occupancy, g.occupancy)
    assert loaded.resolution == g.resolution
    assert (loaded.origin_x, loaded.origin_y) == (g.origin_x, g.origin_y)


def test_raycast_matches_exact_clipping():
    rng = np.random.default_rng(7)
    for _ in range(60):
        g = _random_grid(rng)
        extent = g.width * g.resolution
        # keep endpoints off cell boundaries so both methods agree exactly
        p0 = tuple(rng.uniform(0.01, extent - 0.01, 2) + 0.003)
        p1 = tuple(rng.uniform(0.01, extent - 0.01, 2) + 0.003)
        got = raycast(g, p0, p1)
        expect = oracles.exact_first_hit(
            g.occupancy, g.resolution, 0.0, 0.0, p0[0], p0[1], p1[0], p1[1])
        assert got == expect


def test_raycast_rejects_outside_endpoints():
    g = OccupancyGrid(4, 4, 1.0)
    with pytest.raises(GridIndexError):
        raycast(g, (-1.0, 0.5), (2.0, 2.0))


def test_batch_visibility_matches_per_cell_raycast():
    rng = np.random.default_rng(11)
    for _ in range(20):
        g = _random_grid(rng, density=0.2)
        extent = g.width * g.resolution
        apex = tuple(rng.uniform(0.3, extent - 0.3, 2) + 0.007)
        aix, aiy = g.world_to_cell(*apex)
        targets = np.stack(np.nonzero(~g.occupancy), axis=1)
        got = _batch_visible(g, apex, targets)
        for (ix, iy), vis in zip(targets, got):
            cx, cy = g.cell_center(int(ix), int(iy))
            # target cell itself and apex cell never block in the batch test
            expect = oracles.exact_visible(
                g.occupancy, g.resolution, 0.0, 0.0, apex[0], apex[1], cx, cy,
                exempt={(int(ix), int(iy)), (aix, aiy)})
            assert vis == expect, (ix, iy)


def test_fov_cells_match_brute_force():
    rng = np.random.default_rng(19)
    for occl in (False, True):
        for _ in range(10):
            g = _random_grid(rng, w=16, h=16, res=0.25, density=0.12)
            extent = g.width * g.resolution
            apex = Pose2D(rng.uniform(0.5, extent - 0.5) + 0.007,
                          rng.uniform(0.5, extent - 0.5) + 0.007,
                          rng.uniform(-math.pi, math.pi))
            fov = FovSector(apex, math.pi / 4, 2.0)
            got = cells_in_fov(g, fov, occlusion_aware=occl)
            expect = oracles.fov_cells_brute(
                g.occupancy, g.resolution, 0.0, 0.0,
                (apex.x, apex.y, apex.theta), math.pi / 4, 2.0,
                occlusion_aware=occl)
            assert got == expect


def test_overlap_area_is_set_intersection_size():
    rng = np.random.default_rng(23)
    g = _random_grid(rng, w=24, h=24, res=0.25, density=0.1)
    poses = [Pose2D(rng.uniform(1, 5) + 0.003, rng.uniform(1, 5) + 0.003,
                    rng.uniform(-math.pi, math.pi)) for _ in range(4)]
    fovs = [FovSector(p, math.pi / 4, 2.0) for p in poses]
    got = fov_overlap_area(fovs[0], fovs[1:], g)
    own = cells_in_fov(g, fovs[0])
    union = set()
    for f in fovs[1:]:
        union |= cells_in_fov(g, f)
    assert got == len(own & union)
    with pytest.raises(ValueError):
        fov_overlap_area(fovs[0], [], g)


def test_clearance_field_matches_brute_force():
    rng = np.random.default_rng(29)
    g = _random_grid(rng, w=12, h=12, res=0.5, density=0.2)
    if not g.occupancy.any():
        g.set_occupied(5, 5)
    field = clearance_field(g)
    for ix in range(g.width):
        for iy in range(g.height):
            expect = oracles.min_distance_to_occupied(g.occupancy,
                                                      g.resolution, ix, iy)
            if math.isinf(expect):
                continue
            assert field[ix, iy] == pytest.approx(expect, abs=1e-9)
    assert (field[g.occupancy] == 0.0).all()
