"""Probability-map-driven local search for an object that is not in view.

Maintains a per-cell probability of NOT localizing the object (p_nl) over
a 6 m x 6 m window. Viewpoint-cluster fields of view lower p_nl where the
object was historically seen; fruitless looks decay p_l; replanning picks
the sampled viewpoint minimizing a distance/quality/clearance cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (FovSector, OccupancyGrid, Pose2D, cells_in_fov,
                       clearance_field)
from .viewpoint import ViewpointCluster

LOCAL_WINDOW_M = 6.0
INIT_P_NL_FREE = 0.9

FOUND = "found"
EXHAUSTED = "exhausted"


@dataclass
class SearchConfig:
    p_l_star: float = 0.5
    w_d: float = 0.3
    w_q: float = 1.0
    w_obs: float = 0.5
    sample_count: int = 64
    max_replans: int = 5
    decay: float = 0.2
    fov_half_angle: float = math.pi / 4
    fov_range: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.p_l_star < 1.0):
            raise ValueError("p_l_star must be in (0, 1)")
        if self.sample_count < 1 or self.max_replans < 1:
            raise ValueError("sample_count and max_replans must be >= 1")
        if not (0.0 <= self.decay < 1.0):
            raise ValueError("decay must be in [0, 1)")


class ProbabilityMap:
    """p_nl over the local window; occupied cells pinned at exactly 1."""

    def __init__(self, local_occ: OccupancyGrid, p_nl: np.ndarray | None = None):
        self.grid = local_occ
        if p_nl is None:
            self.p_nl = np.where(local_occ.occupancy, 1.0, INIT_P_NL_FREE)
        else:
            p_nl = np.asarray(p_nl, dtype=np.float64)
            if p_nl.shape != local_occ.occupancy.shape:
                raise ValueError("p_nl shape mismatch")
            self.p_nl = p_nl

    @property
    def p_l(self) -> np.ndarray:
        return 1.0 - self.p_nl

    def copy(self) -> "ProbabilityMap":
        return ProbabilityMap(self.grid, self.p_nl.copy())

    def save_snapshot(self, path):
        """Grayscale image of p_l: brighter = more likely to localize."""
        from PIL import Image

        img = np.clip(self.p_l * 255.0, 0, 255).astype(np.uint8)
        Image.fromarray(img.T[::-1, :], mode="L").save(path)


def local_window(world_grid: OccupancyGrid, center: Pose2D,
                 window_m: float = LOCAL_WINDOW_M) -> OccupancyGrid:
    """Extract the local occupancy window around a pose, clipped to the world."""
    res = world_grid.resolution
    half = window_m / 2.0
    lo_ix = max(0, int(math.floor((center.x - half - world_grid.origin_x) / res)))
    lo_iy = max(0, int(math.floor((center.y - half - world_grid.origin_y) / res)))
    n = int(round(window_m / res))
    hi_ix = min(world_grid.width, lo_ix + n)
    hi_iy = min(world_grid.height, lo_iy + n)
    lo_ix = max(0, hi_ix - n)
    lo_iy = max(0, hi_iy - n)
    occ = world_grid.occupancy[lo_ix:hi_ix, lo_iy:hi_iy].copy()
    return OccupancyGrid(hi_ix - lo_ix, hi_iy - lo_iy, res,
                         world_grid.origin_x + lo_ix * res,
                         world_grid.origin_y + lo_iy * res, occ)


def init_probability_map(local_occ: OccupancyGrid) -> ProbabilityMap:
    """Occupied cells get p_nl = 1, everything else 0.9."""
    return ProbabilityMap(local_occ)


def apply_cluster_views(pmap: ProbabilityMap, cluster: ViewpointCluster,
                        config: SearchConfig) -> ProbabilityMap:
    """Multiply p_nl by (1 - p_l_star) in each viewpoint's FOV.

    Occupied cells (p_nl exactly 1) never change; viewpoint order does not
    matter because the updates commute.
    """
    out = pmap.copy()
    for pose in cluster.members:
        fov = FovSector(pose, config.fov_half_angle, config.fov_range)
        for ix, iy in cells_in_fov(out.grid, fov, occlusion_aware=True):
            if out.p_nl[ix, iy] != 1.0:
                out.p_nl[ix, iy] *= 1.0 - config.p_l_star
    return out


def decay_viewed_region(pmap: ProbabilityMap, fov: FovSector,
                        decay: float) -> ProbabilityMap:
    """p_l <- decay * p_l for cells in the occlusion-aware FOV."""
    if not (0.0 <= decay < 1.0):
        raise ValueError("decay must be in [0, 1)")
    out = pmap.copy()
    for ix, iy in cells_in_fov(out.grid, fov, occlusion_aware=True):
        out.p_nl[ix, iy] = 1.0 - decay * (1.0 - out.p_nl[ix, iy])
    return out


def sample_viewpoints(pmap: ProbabilityMap, robot: Pose2D, count: int,
                      seed: int) -> list[Pose2D]:
    """Seeded uniform samples over free cells, facing the p_l-weighted centroid.

    The robot's current pose is always included as the first candidate.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    free_ix, free_iy = np.nonzero(~pmap.grid.occupancy)
    if free_ix.size == 0:
        raise ValueError("no free cells to sample")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, free_ix.size, size=count)

    cx, cy = pmap.grid.cell_centers()
    weights = pmap.p_l
    total = float(weights.sum())
    if total > 0:
        gx = float((weights * cx).sum() / total)
        gy = float((weights * cy).sum() / total)
    else:
        gx = pmap.grid.origin_x + pmap.grid.width * pmap.grid.resolution / 2
        gy = pmap.grid.origin_y + pmap.grid.height * pmap.grid.resolution / 2

    samples = [robot]
    for k in picks:
        x, y = pmap.grid.cell_center(int(free_ix[k]), int(free_iy[k]))
        theta = math.atan2(gy - y, gx - x) if (gx, gy) != (x, y) else 0.0
        samples.append(Pose2D(x, y, theta))
    return samples


def _quality_cost(pmap: ProbabilityMap, fov: FovSector,
                  config: SearchConfig) -> float:
    """Sum of (1 - p_l) over FOV cells; cells outside the window count 1 each.

    Out-of-window cells are classified by range/angle only (no occupancy
    information exists there), which penalizes viewpoints looking out of
    the local map.
    """
    grid = pmap.grid
    res = grid.resolution
    r = fov.range_m
    total = 0.0
    lo_ix = int(math.floor((fov.apex.x - r - grid.origin_x) / res))
    hi_ix = int(math.floor((fov.apex.x + r - grid.origin_x) / res))
    lo_iy = int(math.floor((fov.apex.y - r - grid.origin_y) / res))
    hi_iy = int(math.floor((fov.apex.y + r - grid.origin_y) / res))
    inside = cells_in_fov(grid, fov, occlusion_aware=True)
    for ix, iy in inside:
        total += 1.0 - (1.0 - pmap.p_nl[ix, iy])
    for ix in range(lo_ix, hi_ix + 1):
        for iy in range(lo_iy, hi_iy + 1):
            if grid.in_bounds(ix, iy):
                continue
            x = grid.origin_x + (ix + 0.5) * res
            y = grid.origin_y + (iy + 0.5) * res
            if fov.contains_point(x, y):
                total += 1.0
    return total


def replan_viewpoint(pmap: ProbabilityMap, samples: list[Pose2D],
                     robot: Pose2D, grid: OccupancyGrid,
                     config: SearchConfig,
                     clearance: np.ndarray | None = None) -> Pose2D:
    """Argmin of weighted distance + view-quality + obstacle-proximity cost.

    Ties break by lower distance cost, then sample order.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    if clearance is None:
        clearance = clearance_field(grid)
    best = None
    for idx, vp in enumerate(samples):
        d2 = (vp.x - robot.x) ** 2 + (vp.y - robot.y) ** 2
        quality = _quality_cost(pmap, FovSector(vp, config.fov_half_angle,
                                                config.fov_range), config)
        if grid.contains_world(vp.x, vp.y):
            ix = int((vp.x - grid.origin_x) / grid.resolution)
            iy = int((vp.y - grid.origin_y) / grid.resolution)
            d_o = float(clearance[ix, iy])
        else:
            d_o = 0.0
        cost = (config.w_d * d2 + config.w_q * quality
                + config.w_obs * math.exp(-d_o * d_o))
        key = (cost, config.w_d * d2, idx)
        if best is None or key < best[0]:
            best = (key, vp)
    return best[1]


@dataclass
class SearchIteration:
    index: int
    viewpoint: Pose2D
    reached: bool
    detected: bool


def local_search_loop(pmap: ProbabilityMap, robot_pose: Callable[[], Pose2D],
                      navigate: Callable[[Pose2D], bool],
                      detect: Callable[[], bool], grid: OccupancyGrid,
                      config: SearchConfig, seed: int,
                      trace: Callable[[SearchIteration, ProbabilityMap], None]
                      | None = None) -> tuple[str, list[SearchIteration]]:
    """Decay -> sample -> replan -> navigate -> detect until found/exhausted.

    A navigation failure consumes a replan and triggers fresh sampling.
    """
    clearance = clearance_field(grid)
    iterations: list[SearchIteration] = []
    for i in range(config.max_replans):
        current = robot_pose()
        fov = FovSector(current, config.fov_half_angle, config.fov_range)
        pmap = decay_viewed_region(pmap, fov, config.decay)
        samples = sample_viewpoints(pmap, current, config.sample_count,
                                    seed + i)
        target = replan_viewpoint(pmap, samples, current, grid, config,
                                  clearance)
        reached = navigate(target)
        detected = bool(reached and detect())
        it = SearchIteration(i, target, reached, detected)
        iterations.append(it)
        if trace is not None:
            trace(it, pmap)
        if detected:
            return FOUND, iterations
    return EXHAUSTED, iterations
