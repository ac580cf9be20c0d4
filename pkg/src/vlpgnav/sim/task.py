"""Task orchestrator: explore / query / navigate / center / local-search.

``run_task`` executes one object-navigation trial in one of four modes:

* ``frontier``     - explore from scratch, approach on first detection.
* ``vlpg``         - drive to the pose-graph viewpoint guess and stop.
* ``vlpg+center``  - same, then center the detected object in the image.
* ``full``         - same, plus probability-map local search on failure.

Every trial is deterministic given (world, config, seed) and emits a
line-delimited JSON trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..centering import PlannerConfig, select_control
from ..embedding import EmbeddingProvider, SyntheticProvider
from ..geometry import FovSector, Pose2D, clearance_field, normalize_angle
from ..graph import Vlpg
from ..localsearch import (SearchConfig, apply_cluster_views,
                           decay_viewed_region, init_probability_map,
                           local_window, replan_viewpoint, sample_viewpoints)
from ..viewpoint import ViewpointConfig, query_viewpoint
from .explore import ExploreConfig, WaypointFollower, find_frontiers
from .planner import PlanningError, plan_global_path
from .sensors import (SensorConfig, object_in_view, render_detection,
                      visible_cells_mask)
from .world import RobotState, WorldModel, step

MODES = ("frontier", "vlpg", "vlpg+center", "full")

# termination reasons
CENTERED = "centered"
ARRIVED = "arrived"
NO_PRIOR = "no_prior"
NOT_VISIBLE = "not_visible"
EXHAUSTED = "exhausted"
TIMEOUT = "timeout"
UNREACHABLE = "unreachable"


@dataclass
class TaskConfig:
    dt: float = 0.1
    timeout_s: float = 300.0
    center_threshold_px: float = 5.0
    stable_steps: int = 10
    scan_omega: float = 1.0
    approach_standoff: float = 1.0
    center_engage_dist: float = 2.5
    lost_grace_s: float = 5.0
    image_width: int = 640
    image_height: int = 480
    sensor: SensorConfig = field(default_factory=SensorConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    viewpoint: ViewpointConfig = field(default_factory=ViewpointConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)


@dataclass
class ScenarioResult:
    scenario_id: str
    mode: str
    success: int
    pixel_error: float | None
    delta_theta: float | None
    replans_used: int
    reason: str
    seed: int
    sim_time: float
    trace: list[dict] = field(default_factory=list)


class _Timeout(Exception):
    pass


class _Done(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class TaskRunner:
    def __init__(self, world: WorldModel, graph: Vlpg | None, query: str,
                 mode: str, config: TaskConfig, seed: int,
                 provider: EmbeddingProvider | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.world = world.copy()
        self.graph = graph
        self.query = query
        self.mode = mode
        self.config = config
        self.seed = seed
        self.provider = provider or SyntheticProvider()
        self.cam = config.sensor.camera(config.image_width,
                                        config.image_height)
        self.state = RobotState(self.world.robot_start)
        self.rng = np.random.default_rng(seed)
        self.t = 0.0
        self.trace: list[dict] = []
        self.replans_used = 0
        self.phase = "init"
        self._stable = 0
        self._clearance = None
        self._clearance_stamp = -1
        self.world.apply_events(0.0)

    # -- simulation stepping --------------------------------------------------

    def _clearance_now(self):
        stamp = len(self.world._pending)
        if self._clearance is None or stamp != self._clearance_stamp:
            self._clearance = clearance_field(self.world.grid)
            self._clearance_stamp = stamp
        return self._clearance

    def _detect(self):
        return render_detection(self.world, self.state.pose, self.cam,
                                self.query, self.config.sensor, self.rng)

    def _tick(self, control: tuple[float, float], det=None):
        self.state = step(self.world, self.state, control, self.config.dt)
        self.t += self.config.dt
        if self.world.apply_events(self.t):
            self._clearance = None
        u = None if det is None else round(det.box.center_u, 2)
        self.trace.append({
            "t": round(self.t, 3), "phase": self.phase,
            "x": round(self.state.pose.x, 4), "y": round(self.state.pose.y, 4),
            "theta": round(self.state.pose.theta, 4), "u": u})
        if self.t >= self.config.timeout_s:
            raise _Timeout()

    def _check_centered(self, det):
        if det is not None and abs(det.box.center_u) <= self.config.center_threshold_px:
            self._stable += 1
        else:
            self._stable = 0
        if self._stable >= self.config.stable_steps:
            raise _Done(CENTERED)

    # -- phases ---------------------------------------------------------------

    def _navigate_to(self, goal: Pose2D, detect_along: bool = False,
                     center_on_detect: bool = False) -> bool:
        """Waypoint-follow to a pose; returns False when unplannable.

        With center_on_detect, hands over to the centering loop as soon as
        the object is detected near the goal.
        """
        try:
            path = plan_global_path(self.world.grid, self.state.pose, goal)
        except PlanningError:
            return False
        follower = WaypointFollower(path, self.config.explore.v_max,
                                    self.config.explore.omega_max,
                                    final_heading=goal.theta)
        anchor = (self.state.pose.x, self.state.pose.y, self.t)
        while not follower.done:
            det = self._detect() if detect_along else None
            if (center_on_detect and det is not None
                    and self.state.pose.distance_to(goal)
                    <= self.config.center_engage_dist):
                self._center_loop(goal)
                return True
            control = follower.control(self.state.pose)
            self._tick(control, det)
            ax, ay, at = anchor
            moved = math.hypot(self.state.pose.x - ax,
                               self.state.pose.y - ay) > 0.05
            if moved or control[0] == 0.0:
                anchor = (self.state.pose.x, self.state.pose.y, self.t)
            elif self.t - at > 10.0:
                # wedged; close enough counts as arrival
                return self.state.pose.distance_to(goal) < 0.5
        return True

    def _scan_for_object(self) -> bool:
        """Rotate one full turn in place looking for the object."""
        turned = 0.0
        omega = self.config.scan_omega
        while turned < 2.0 * math.pi:
            det = self._detect()
            if det is not None:
                return True
            self._tick((0.0, omega), det)
            turned += abs(omega) * self.config.dt
        return self._detect() is not None

    def _center_loop(self, anchor: Pose2D):
        """Drive the detected box to the image center; raises _Done(CENTERED).

        Falls through (returns) when the object stays lost for the grace
        period.
        """
        self.phase = "center"
        lost = 0.0
        goal = anchor
        while True:
            det = self._detect()
            if det is not None:
                lost = 0.0
                bearing = self.cam.u_to_bearing(det.box.center_u)
                heading = self.state.pose.theta - bearing
                standoff = max(self.config.planner.zoom.d_thresh + 0.2,
                               det.box.depth_estimate
                               - self.config.approach_standoff)
                # anchor the progress term a standoff short of the object
                goal = Pose2D(
                    self.state.pose.x + standoff * math.cos(heading),
                    self.state.pose.y + standoff * math.sin(heading),
                    heading)
            else:
                lost += self.config.dt
                if lost >= self.config.lost_grace_s:
                    return
            control = select_control(self.state.pose,
                                     det.box if det else None, goal,
                                     self.world.grid, self.cam,
                                     self.config.planner,
                                     self._clearance_now())
            self._tick(control, det)
            self._check_centered(det)

    # -- modes ----------------------------------------------------------------

    def _run_frontier(self):
        self.phase = "explore"
        sensor = self.config.sensor
        grid = self.world.grid
        cfg = self.config.explore
        explored = visible_cells_mask(grid, self.state.pose, sensor)
        blacklist = np.zeros_like(explored)
        follower = None
        next_frontier_t = 0.0
        next_mask_t = 0.0
        # same panoramic sweeps the mapping explorer performs; the baseline
        # is query-blind, so no detector feedback steers or stops it
        scan_remaining = 2.0 * math.pi
        while True:
            if scan_remaining > 0.0:
                self._tick((0.0, cfg.omega_max), None)
                scan_remaining -= cfg.omega_max * self.config.dt
                if self.t >= next_mask_t:
                    explored |= visible_cells_mask(grid, self.state.pose,
                                                   sensor)
                    next_mask_t = self.t + cfg.mask_period
                continue
            if follower is not None and follower.done:
                follower = None
                scan_remaining = 2.0 * math.pi
                continue
            if follower is None or self.t >= next_frontier_t:
                frontiers = find_frontiers(grid.occupancy, explored,
                                           cfg.min_frontier_cells,
                                           exclude=blacklist)
                follower = None
                frontiers.sort(key=lambda f: (
                    (grid.origin_x + (f[0] + 0.5) * grid.resolution
                     - self.state.pose.x) ** 2
                    + (grid.origin_y + (f[1] + 0.5) * grid.resolution
                       - self.state.pose.y) ** 2))
                target_mask = None
                for fx, fy, mask in frontiers:
                    gx = grid.origin_x + (fx + 0.5) * grid.resolution
                    gy = grid.origin_y + (fy + 0.5) * grid.resolution
                    try:
                        path = plan_global_path(grid, self.state.pose,
                                                Pose2D(gx, gy))
                        follower = WaypointFollower(path, cfg.v_max,
                                                    cfg.omega_max)
                        target_mask = mask
                        break
                    except PlanningError:
                        blacklist |= mask
                if follower is None:
                    raise _Done(NOT_VISIBLE)
                next_frontier_t = self.t + cfg.frontier_period
                anchor = (self.state.pose.x, self.state.pose.y, self.t)
            control = follower.control(self.state.pose)
            self._tick(control, None)
            ax, ay, at = anchor
            moved = math.hypot(self.state.pose.x - ax,
                               self.state.pose.y - ay) > 0.05
            if moved or control[0] == 0.0:
                anchor = (self.state.pose.x, self.state.pose.y, self.t)
            elif self.t - at > 10.0 and target_mask is not None:
                # wedged; drop this frontier region and replan
                blacklist |= target_mask
                follower = None
                next_frontier_t = self.t
                continue
            if self.t >= next_mask_t:
                explored |= visible_cells_mask(grid, self.state.pose, sensor)
                next_mask_t = self.t + cfg.mask_period

    def _run_vlpg(self, center: bool, search: bool):
        if self.graph is None or len(self.graph) == 0:
            raise _Done(NO_PRIOR)
        self.phase = "query"
        vq = query_viewpoint(self.graph, self.query, self.provider,
                             self.world.grid, self.config.viewpoint)
        if vq.no_prior:
            raise _Done(NO_PRIOR)
        self.phase = "navigate"
        reached = self._navigate_to(vq.pose, detect_along=center,
                                    center_on_detect=center)
        if not center:
            raise _Done(ARRIVED if reached else UNREACHABLE)
        if not reached:
            raise _Done(UNREACHABLE)

        # arrived (or centering handed back after losing the object)
        self.phase = "verify"
        if self._detect() is not None or self._scan_for_object():
            self._center_loop(vq.pose)
            raise _Done(NOT_VISIBLE)
        if not search:
            raise _Done(NOT_VISIBLE)
        self._local_search(vq)
        raise _Done(NOT_VISIBLE)

    def _local_search(self, vq):
        self.phase = "search"
        cfg = self.config.search
        window = local_window(self.world.grid, vq.pose)
        pmap = init_probability_map(window)
        if vq.cluster is not None:
            pmap = apply_cluster_views(pmap, vq.cluster, cfg)
        clearance = self._clearance_now()
        for i in range(cfg.max_replans):
            self.replans_used = i + 1
            fov = FovSector(self.state.pose, cfg.fov_half_angle,
                            cfg.fov_range)
            pmap = decay_viewed_region(pmap, fov, cfg.decay)
            samples = sample_viewpoints(pmap, self.state.pose,
                                        cfg.sample_count, self.seed + i)
            target = replan_viewpoint(pmap, samples, self.state.pose,
                                      self.world.grid, cfg, clearance)
            self._pmap_snapshot(pmap, i)
            reached = self._navigate_to(target, detect_along=True,
                                        center_on_detect=True)
            if not reached:
                continue
            if self._detect() is not None or self._scan_for_object():
                self._center_loop(target)
                return
        raise _Done(EXHAUSTED)

    def _pmap_snapshot(self, pmap, index):
        if getattr(self, "snapshot_dir", None):
            path = Path(self.snapshot_dir)
            path.mkdir(parents=True, exist_ok=True)
            pmap.save_snapshot(path / f"pmap_{index:02d}.png")

    # -- driver ---------------------------------------------------------------

    def run(self, scenario_id: str = "") -> ScenarioResult:
        reason = TIMEOUT
        try:
            if self.mode == "frontier":
                self._run_frontier()
            elif self.mode == "vlpg":
                self._run_vlpg(center=False, search=False)
            elif self.mode == "vlpg+center":
                self._run_vlpg(center=True, search=False)
            else:
                self._run_vlpg(center=True, search=True)
        except _Timeout:
            reason = TIMEOUT
        except _Done as done:
            reason = done.reason
        return self._result(scenario_id, reason)

    def _result(self, scenario_id: str, reason: str) -> ScenarioResult:
        pose = self.state.pose
        success = int(object_in_view(self.world, pose, self.query,
                                     self.config.sensor))
        recent_u = [e["u"] for e in self.trace[-self.config.stable_steps:]
                    if e["u"] is not None]
        if recent_u:
            pixel_error = round(float(np.mean([abs(u) for u in recent_u])))
        else:
            # modes that never track a box still report the final offset
            det = self._detect()
            pixel_error = (None if det is None
                           else round(abs(float(det.box.center_u))))
        delta_theta = self._delta_theta()
        return ScenarioResult(scenario_id, self.mode, success, pixel_error,
                              delta_theta, self.replans_used, reason,
                              self.seed, round(self.t, 3), self.trace)

    def _delta_theta(self) -> float | None:
        """Ground-truth line-of-sight angular error to the nearest instance."""
        pose = self.state.pose
        best = None
        for obj in self.world.objects_with_label(self.query):
            cx, cy = obj.centroid(self.world.grid)
            if (cx, cy) == (pose.x, pose.y):
                continue
            err = abs(normalize_angle(math.atan2(cy - pose.y, cx - pose.x)
                                      - pose.theta))
            d = math.hypot(cx - pose.x, cy - pose.y)
            if best is None or d < best[0]:
                best = (d, err)
        return None if best is None else best[1]


def run_task(world: WorldModel, graph: Vlpg | None, query: str, mode: str,
             config: TaskConfig | None = None, seed: int = 0,
             provider: EmbeddingProvider | None = None,
             scenario_id: str = "", snapshot_dir=None) -> ScenarioResult:
    runner = TaskRunner(world, graph, query, mode, config or TaskConfig(),
                        seed, provider)
    runner.snapshot_dir = snapshot_dir
    return runner.run(scenario_id)


def write_trace(result: ScenarioResult, path):
    with open(path, "w") as f:
        for entry in result.trace:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
