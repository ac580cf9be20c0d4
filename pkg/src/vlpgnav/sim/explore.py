"""Frontier-based exploration and simple waypoint following.

The explorer repeatedly drives to the nearest reachable frontier centroid
(frontier = free explored cell adjacent to unexplored space) while
optionally recording visual-language pose-graph nodes at a fixed period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..embedding import EmbeddingProvider
from ..geometry import Pose2D, normalize_angle
from ..graph import Vlpg
from .planner import PlanningError, plan_global_path
from .sensors import SensorConfig, observe, visible_cells_mask
from .world import RobotState, WorldModel, step


class WaypointFollower:
    """Turn-then-go controller over a waypoint list."""

    def __init__(self, waypoints, v_max: float = 0.5, omega_max: float = 1.5,
                 arrive_tol: float = 0.15, final_heading: float | None = None):
        self.waypoints = list(waypoints)
        self.v_max = v_max
        self.omega_max = omega_max
        self.arrive_tol = arrive_tol
        self.final_heading = final_heading
        self.idx = 0

    @property
    def done(self) -> bool:
        return self.idx >= len(self.waypoints) and self.final_heading is None

    def control(self, pose: Pose2D) -> tuple[float, float]:
        while self.idx < len(self.waypoints):
            wx, wy = self.waypoints[self.idx]
            if math.hypot(wx - pose.x, wy - pose.y) < self.arrive_tol:
                self.idx += 1
                continue
            break
        if self.idx >= len(self.waypoints):
            if self.final_heading is not None:
                err = normalize_angle(self.final_heading - pose.theta)
                if abs(err) < 0.05:
                    self.final_heading = None
                    return (0.0, 0.0)
                return (0.0, max(-self.omega_max, min(self.omega_max, 3.0 * err)))
            return (0.0, 0.0)
        wx, wy = self.waypoints[self.idx]
        err = pose.bearing_to(wx, wy)
        omega = max(-self.omega_max, min(self.omega_max, 3.0 * err))
        v = self.v_max if abs(err) < 0.6 else 0.0
        return (v, omega)


@dataclass
class ExploreConfig:
    dt: float = 0.1
    node_period: float = 0.1
    budget_s: float = 1800.0
    # household navigation speed; also used by the task waypoint follower
    v_max: float = 0.1
    omega_max: float = 1.5
    frontier_period: float = 1.0
    min_frontier_cells: int = 4
    mask_period: float = 0.5


@dataclass
class ExploreResult:
    trace: list[dict] = field(default_factory=list)
    explored: np.ndarray | None = None
    coverage: float = 0.0
    sim_time: float = 0.0


def find_frontiers(grid_occ: np.ndarray, explored: np.ndarray,
                   min_cells: int, exclude: np.ndarray | None = None
                   ) -> list[tuple[float, float, np.ndarray]]:
    """Connected frontier regions as (centroid_ix, centroid_iy, mask)."""
    free = ~grid_occ
    unexplored = free & ~explored
    known_free = free & explored
    adj = ndimage.binary_dilation(unexplored,
                                  structure=ndimage.generate_binary_structure(2, 1))
    frontier = known_free & adj
    if exclude is not None:
        frontier &= ~exclude
    # 8-connectivity: frontier lines often run diagonally and would
    # otherwise shatter into single-cell regions below min_cells
    labels, n = ndimage.label(
        frontier, structure=ndimage.generate_binary_structure(2, 2))
    out = []
    for lbl in range(1, n + 1):
        mask = labels == lbl
        if mask.sum() < min_cells:
            continue
        ixs, iys = np.nonzero(mask)
        # representative point: the frontier cell nearest the centroid, so
        # the target is always on the (known-free) frontier itself
        cx, cy = ixs.mean(), iys.mean()
        k = int(np.argmin((ixs - cx) ** 2 + (iys - cy) ** 2))
        out.append((float(ixs[k]), float(iys[k]), mask))
    return out


def frontier_explore(world: WorldModel, start: Pose2D | None = None,
                     graph: Vlpg | None = None,
                     provider: EmbeddingProvider | None = None,
                     sensor: SensorConfig | None = None,
                     config: ExploreConfig | None = None) -> ExploreResult:
    """Explore until no frontiers remain or the time budget runs out.

    When graph and provider are given, a node is recorded every
    ``node_period`` of simulated time from the current camera observation.
    """
    sensor = sensor or SensorConfig()
    config = config or ExploreConfig()
    state = RobotState(start or world.robot_start)
    grid = world.grid

    explored = visible_cells_mask(grid, state.pose, sensor)
    result = ExploreResult(explored=explored)
    blacklisted: np.ndarray = np.zeros_like(explored)

    t = 0.0
    next_node_t = 0.0
    next_mask_t = 0.0
    follower: WaypointFollower | None = None
    next_frontier_t = 0.0
    free_total = int((~grid.occupancy).sum())
    scan_remaining = 2.0 * math.pi  # look around once before moving off

    while t < config.budget_s:
        if scan_remaining > 0.0:
            state = step(world, state, (0.0, config.omega_max), config.dt)
            scan_remaining -= config.omega_max * config.dt
            t += config.dt
            if t >= next_mask_t:
                explored |= visible_cells_mask(grid, state.pose, sensor)
                next_mask_t = t + config.mask_period
            if graph is not None and provider is not None and t >= next_node_t:
                obs = observe(world, state.pose, sensor)
                accepted = graph.record_node(state.pose,
                                             provider.embed_image(obs), t)
                next_node_t = t + config.node_period
            else:
                accepted = False
            result.trace.append({"t": round(t, 3), "x": state.pose.x,
                                 "y": state.pose.y,
                                 "theta": state.pose.theta,
                                 "node_added": bool(accepted)})
            continue
        if follower is None or follower.done or t >= next_frontier_t:
            frontiers = find_frontiers(grid.occupancy, explored,
                                       config.min_frontier_cells,
                                       exclude=blacklisted)
            if not frontiers:
                if follower is None or follower.done:
                    break
            else:
                frontiers.sort(key=lambda f: (
                    (grid.origin_x + (f[0] + 0.5) * grid.resolution - state.pose.x) ** 2
                    + (grid.origin_y + (f[1] + 0.5) * grid.resolution - state.pose.y) ** 2))
                target = None
                for fx, fy, mask in frontiers:
                    gx = grid.origin_x + (fx + 0.5) * grid.resolution
                    gy = grid.origin_y + (fy + 0.5) * grid.resolution
                    try:
                        path = plan_global_path(grid, state.pose,
                                                Pose2D(gx, gy))
                        target = path
                        target_mask = mask
                        break
                    except PlanningError:
                        blacklisted |= mask
                if target is None:
                    break
                follower = WaypointFollower(target, config.v_max,
                                            config.omega_max)
                stall_anchor = (state.pose.x, state.pose.y, t)
            next_frontier_t = t + config.frontier_period

        control = follower.control(state.pose) if follower else (0.0, 0.0)
        state = step(world, state, control, config.dt)
        t += config.dt
        # wedged against an obstacle: give up on this frontier region
        if follower is not None and not follower.done:
            ax, ay, at = stall_anchor
            moved = math.hypot(state.pose.x - ax, state.pose.y - ay) > 0.05
            if moved or control[0] == 0.0:
                stall_anchor = (state.pose.x, state.pose.y, t)
            elif t - at > 10.0:
                blacklisted |= target_mask
                follower = None
                next_frontier_t = t
        if t >= next_mask_t:
            explored |= visible_cells_mask(grid, state.pose, sensor)
            next_mask_t = t + config.mask_period

        if graph is not None and provider is not None and t >= next_node_t:
            obs = observe(world, state.pose, sensor)
            accepted = graph.record_node(state.pose,
                                         provider.embed_image(obs), t)
            next_node_t = t + config.node_period
        else:
            accepted = False
        result.trace.append({"t": round(t, 3), "x": state.pose.x,
                             "y": state.pose.y, "theta": state.pose.theta,
                             "node_added": bool(accepted)})
        if follower is not None and follower.done:
            follower = None
            scan_remaining = 2.0 * math.pi  # panoramic sweep at the frontier

    result.explored = explored
    result.coverage = float((explored & ~grid.occupancy).sum()) / max(1, free_total)
    result.sim_time = t
    return result
