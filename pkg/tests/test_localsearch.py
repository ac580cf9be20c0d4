"""Probability-map local search against cell-by-cell reference evaluators."""

import math

import numpy as np
import pytest

import oracles
from vlpgnav.geometry import FovSector, OccupancyGrid, Pose2D, clearance_field
from vlpgnav.localsearch import (EXHAUSTED, FOUND, INIT_P_NL_FREE,
                                 ProbabilityMap, SearchConfig,
                                 apply_cluster_views, decay_viewed_region,
                                 init_probability_map, local_search_loop,
                                 local_window, replan_viewpoint,
                                 sample_viewpoints)
from vlpgnav.viewpoint import ViewpointCluster


def random_grid(rng, n=20, res=0.3, p_occ=0.12):
    occ = rng.random((n, n)) < p_occ
    return OccupancyGrid(n, n, res, 0.0, 0.0, occ)


def random_pose_in(grid, rng):
    x = rng.uniform(0.0, grid.width * grid.resolution)
    y = rng.uniform(0.0, grid.height * grid.resolution)
    return Pose2D(x, y, rng.uniform(-math.pi, math.pi))


def make_cluster(poses):
    return ViewpointCluster(tuple(poses), tuple(range(len(poses))), 0)


class TestProbabilityMap:
    def test_init_values(self):
        occ = np.zeros((4, 4), dtype=bool)
        occ[1, 2] = True
        pmap = init_probability_map(OccupancyGrid(4, 4, 0.5, 0.0, 0.0, occ))
        assert pmap.p_nl[1, 2] == 1.0
        assert pmap.p_nl[0, 0] == INIT_P_NL_FREE
        assert np.allclose(pmap.p_l, 1.0 - pmap.p_nl)

    def test_shape_mismatch_rejected(self):
        grid = OccupancyGrid(4, 4, 0.5, 0.0, 0.0, np.zeros((4, 4), dtype=bool))
        with pytest.raises(ValueError):
            ProbabilityMap(grid, np.zeros((3, 4)))

    def test_copy_is_independent(self):
        grid = OccupancyGrid(4, 4, 0.5, 0.0, 0.0, np.zeros((4, 4), dtype=bool))
        a = init_probability_map(grid)
        b = a.copy()
        b.p_nl[0, 0] = 0.1
        assert a.p_nl[0, 0] == INIT_P_NL_FREE


class TestClusterUpdate:
    def test_matches_reference_on_random_maps(self):
        config = SearchConfig()
        rng = np.random.default_rng(7)
        for _ in range(25):
            grid = random_grid(rng)
            pmap = init_probability_map(grid)
            # pre-pin a few free cells at exactly 1 to exercise the guard
            free_ix, free_iy = np.nonzero(~grid.occupancy)
            for k in rng.integers(0, free_ix.size, size=3):
                pmap.p_nl[free_ix[k], free_iy[k]] = 1.0
            poses = [random_pose_in(grid, rng)
                     for _ in range(int(rng.integers(1, 5)))]
            out = apply_cluster_views(pmap, make_cluster(poses), config)
            ref = oracles.cluster_update_reference(
                pmap.p_nl, grid.occupancy, grid.resolution,
                grid.origin_x, grid.origin_y,
                [(p.x, p.y, p.theta) for p in poses],
                config.fov_half_angle, config.fov_range, config.p_l_star)
            assert np.max(np.abs(out.p_nl - ref)) < 1e-12

    def test_direct_values(self):
        # one view over a free cell: 0.9 * (1 - 0.5) = 0.45; twice: 0.225
        occ = np.zeros((10, 10), dtype=bool)
        grid = OccupancyGrid(10, 10, 0.3, 0.0, 0.0, occ)
        pmap = init_probability_map(grid)
        config = SearchConfig(p_l_star=0.5)
        pose = Pose2D(1.5, 1.5, 0.0)
        once = apply_cluster_views(pmap, make_cluster([pose]), config)
        assert once.p_nl[7, 5] == pytest.approx(0.45, abs=1e-12)
        twice = apply_cluster_views(pmap, make_cluster([pose, pose]), config)
        assert twice.p_nl[7, 5] == pytest.approx(0.225, abs=1e-12)

    def test_occupied_cells_pinned(self):
        occ = np.zeros((10, 10), dtype=bool)
        occ[8, 5] = True
        grid = OccupancyGrid(10, 10, 0.3, 0.0, 0.0, occ)
        pmap = init_probability_map(grid)
        out = apply_cluster_views(
            pmap, make_cluster([Pose2D(1.5, 1.65, 0.0)]), SearchConfig())
        assert out.p_nl[8, 5] == 1.0

    def test_view_order_is_irrelevant(self):
        config = SearchConfig()
        rng = np.random.default_rng(11)
        grid = random_grid(rng)
        pmap = init_probability_map(grid)
        poses = [random_pose_in(grid, rng) for _ in range(5)]
        fwd = apply_cluster_views(pmap, make_cluster(poses), config)
        rev = apply_cluster_views(pmap, make_cluster(poses[::-1]), config)
        assert np.array_equal(fwd.p_nl, rev.p_nl)


class TestDecay:
    def test_closed_form(self):
        occ = np.zeros((10, 10), dtype=bool)
        grid = OccupancyGrid(10, 10, 0.3, 0.0, 0.0, occ)
        pmap = init_probability_map(grid)
        fov = FovSector(Pose2D(1.5, 1.5, 0.0), math.pi / 4, 3.0)
        out = decay_viewed_region(pmap, fov, 0.2)
        # p_l 0.1 -> 0.02, so p_nl 0.9 -> 0.98 inside the sector
        assert out.p_nl[7, 5] == pytest.approx(0.98, abs=1e-12)
        assert out.p_nl[0, 9] == INIT_P_NL_FREE  # behind the camera

    def test_rejects_bad_decay(self):
        occ = np.zeros((4, 4), dtype=bool)
        pmap = init_probability_map(OccupancyGrid(4, 4, 0.5, 0.0, 0.0, occ))
        fov = FovSector(Pose2D(1.0, 1.0, 0.0), math.pi / 4, 2.0)
        with pytest.raises(ValueError):
            decay_viewed_region(pmap, fov, 1.0)

    def test_repeated_decay_monotone(self):
        occ = np.zeros((10, 10), dtype=bool)
        grid = OccupancyGrid(10, 10, 0.3, 0.0, 0.0, occ)
        pmap = init_probability_map(grid)
        fov = FovSector(Pose2D(1.5, 1.5, 0.0), math.pi / 4, 3.0)
        prev = pmap.p_nl[7, 5]
        for _ in range(4):
            pmap = decay_viewed_region(pmap, fov, 0.5)
            assert pmap.p_nl[7, 5] > prev
            prev = pmap.p_nl[7, 5]
        assert prev < 1.0


class TestSampling:
    def test_deterministic_and_on_free_cells(self):
        rng = np.random.default_rng(3)
        grid = random_grid(rng)
        pmap = init_probability_map(grid)
        robot = Pose2D(2.0, 2.0, 0.5)
        a = sample_viewpoints(pmap, robot, 32, seed=9)
        b = sample_viewpoints(pmap, robot, 32, seed=9)
        assert a == b
        assert a[0] == robot
        for vp in a[1:]:
            ix = int((vp.x - grid.origin_x) / grid.resolution)
            iy = int((vp.y - grid.origin_y) / grid.resolution)
            assert not grid.occupancy[ix, iy]

    def test_count_validation(self):
        occ = np.zeros((4, 4), dtype=bool)
        pmap = init_probability_map(OccupancyGrid(4, 4, 0.5, 0.0, 0.0, occ))
        with pytest.raises(ValueError):
            sample_viewpoints(pmap, Pose2D(1, 1, 0), 0, seed=0)

    def test_no_free_cells(self):
        occ = np.ones((4, 4), dtype=bool)
        pmap = ProbabilityMap(OccupancyGrid(4, 4, 0.5, 0.0, 0.0, occ))
        with pytest.raises(ValueError):
            sample_viewpoints(pmap, Pose2D(1, 1, 0), 4, seed=0)


class TestReplan:
    def test_matches_reference_argmin(self):
        config = SearchConfig()
        rng = np.random.default_rng(19)
        for _ in range(10):
            grid = random_grid(rng)
            pmap = init_probability_map(grid)
            robot = random_pose_in(grid, rng)
            samples = sample_viewpoints(pmap, robot, 24,
                                        seed=int(rng.integers(1 << 30)))
            clearance = clearance_field(grid)
            chosen = replan_viewpoint(pmap, samples, robot, grid, config,
                                      clearance)
            costs = []
            for idx, vp in enumerate(samples):
                c = oracles.replan_cost_reference(
                    pmap.p_nl, grid.occupancy, grid.resolution,
                    grid.origin_x, grid.origin_y, (vp.x, vp.y, vp.theta),
                    (robot.x, robot.y), clearance, config.w_d, config.w_q,
                    config.w_obs, config.fov_half_angle, config.fov_range)
                d2 = (vp.x - robot.x) ** 2 + (vp.y - robot.y) ** 2
                costs.append((c, config.w_d * d2, idx))
            expected = samples[min(costs)[2]]
            assert chosen == expected

    def test_empty_samples_rejected(self):
        occ = np.zeros((4, 4), dtype=bool)
        grid = OccupancyGrid(4, 4, 0.5, 0.0, 0.0, occ)
        pmap = init_probability_map(grid)
        with pytest.raises(ValueError):
            replan_viewpoint(pmap, [], Pose2D(1, 1, 0), grid, SearchConfig())


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        {"p_l_star": 0.0}, {"p_l_star": 1.0}, {"sample_count": 0},
        {"max_replans": 0}, {"decay": -0.1}, {"decay": 1.0},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SearchConfig(**kwargs)


class TestSearchLoop:
    def _setup(self):
        occ = np.zeros((20, 20), dtype=bool)
        grid = OccupancyGrid(20, 20, 0.3, 0.0, 0.0, occ)
        return init_probability_map(grid), grid

    def test_found_stops_early(self):
        pmap, grid = self._setup()
        pose = [Pose2D(3.0, 3.0, 0.0)]

        def navigate(target):
            pose[0] = target
            return True

        hits = iter([False, True, True])
        status, its = local_search_loop(
            pmap, lambda: pose[0], navigate, lambda: next(hits), grid,
            SearchConfig(max_replans=5), seed=0)
        assert status == FOUND
        assert len(its) == 2
        assert its[-1].detected

    def test_exhausted_after_max_replans(self):
        pmap, grid = self._setup()
        pose = [Pose2D(3.0, 3.0, 0.0)]

        def navigate(target):
            pose[0] = target
            return True

        status, its = local_search_loop(
            pmap, lambda: pose[0], navigate, lambda: False, grid,
            SearchConfig(max_replans=3), seed=0)
        assert status == EXHAUSTED
        assert len(its) == 3

    def test_navigation_failure_consumes_replan(self):
        pmap, grid = self._setup()
        status, its = local_search_loop(
            pmap, lambda: Pose2D(3.0, 3.0, 0.0), lambda t: False,
            lambda: True, grid, SearchConfig(max_replans=2), seed=0)
        assert status == EXHAUSTED
        assert all(not it.detected for it in its)


class TestLocalWindow:
    def test_window_clipped_to_world(self):
        occ = np.zeros((200, 200), dtype=bool)
        occ[40, 40] = True
        grid = OccupancyGrid(200, 200, 0.05, 0.0, 0.0, occ)
        win = local_window(grid, Pose2D(2.0, 2.0, 0.0), window_m=6.0)
        assert win.width == 120 and win.height == 120
        assert win.origin_x == 0.0 and win.origin_y == 0.0
        assert win.occupancy[40, 40]

    def test_interior_window_centered(self):
        occ = np.zeros((200, 200), dtype=bool)
        grid = OccupancyGrid(200, 200, 0.05, 0.0, 0.0, occ)
        win = local_window(grid, Pose2D(5.0, 5.0, 0.0), window_m=6.0)
        assert win.width == 120
        assert win.origin_x == pytest.approx(2.0)
        assert win.origin_y == pytest.approx(2.0)
