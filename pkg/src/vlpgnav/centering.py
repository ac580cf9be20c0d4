"""Object-centering local planner.

Scores short-horizon constant-control rollouts with progress, action, and
collision terms. When a bounding box is tracked, the progress term also
carries an orient cost (squared pixel error of the box center, predicted
with the planar image Jacobian) and a zoom cost rewarding approach.

Image convention: the box center coordinate ``center_u`` is measured from
the image center and equals ``focal_px * tan(bearing)`` where bearing is
the CCW-positive angle of the object relative to the robot heading. A
positive yaw rate therefore drives ``center_u`` down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import OccupancyGrid, Pose2D, clearance_field, normalize_angle

_MIN_DEPTH = 1e-3


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera; horizontal_fov is implied by focal length and width."""

    focal_px: float
    image_width: int
    image_height: int

    @property
    def horizontal_fov(self) -> float:
        return 2.0 * math.atan(self.image_width / (2.0 * self.focal_px))

    @classmethod
    def from_fov(cls, horizontal_fov: float, image_width: int = 640,
                 image_height: int = 480) -> "CameraModel":
        focal = image_width / (2.0 * math.tan(horizontal_fov / 2.0))
        return cls(focal, image_width, image_height)

    def bearing_to_u(self, bearing: float) -> float:
        return self.focal_px * math.tan(bearing)

    def u_to_bearing(self, u: float) -> float:
        return math.atan(u / self.focal_px)


@dataclass(frozen=True)
class BoundingBoxState:
    """Detected object box in image space; center_u relative to image center."""

    center_u: float
    center_v: float
    width: float
    height: float
    depth_estimate: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("box dimensions must be positive")


@dataclass(frozen=True)
class ZoomParams:
    d_thresh: float = 0.5
    d_max: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.d_thresh < self.d_max):
            raise ValueError("require 0 < d_thresh < d_max")


@dataclass(frozen=True)
class TrajectoryRollout:
    """Constant-control rollout split into N segments of duration h."""

    controls: tuple[tuple[float, float], ...]
    h: float
    poses: tuple[Pose2D, ...]  # length N + 1, start pose first
    p_s: tuple[float, ...]     # length N, non-increasing

    def __post_init__(self):
        n = len(self.controls)
        if len(self.poses) != n + 1 or len(self.p_s) != n:
            raise ValueError("rollout segment counts inconsistent")
        if any(b > a + 1e-12 for a, b in zip(self.p_s, self.p_s[1:])):
            raise ValueError("p_s must be non-increasing")


@dataclass
class PlannerConfig:
    n_v: int = 7
    n_omega: int = 11
    n_segments: int = 10
    h: float = 0.1
    v_max: float = 0.1
    omega_max: float = 1.0
    w_progress: float = 1.0
    w_orient: float = 2.0
    w_zoom: float = 1.0
    w_action: float = 0.01
    collision_penalty: float = 10.0
    safe_clearance: float = 0.15
    clearance_decay: float = 8.0
    zoom: ZoomParams = ZoomParams()


def _step_pose(x, y, theta, v, omega, h):
    return x + v * math.cos(theta) * h, y + v * math.sin(theta) * h, theta + omega * h


def _predict_u_depth(u, depth, v, omega, h, focal):
    """One Jacobian step for arrays or scalars of box center / depth."""
    bearing = np.arctan(u / focal)
    cosb = np.cos(bearing)
    u_next = u + h * (-focal * omega * (1.0 + (u / focal) ** 2)
                      + v * u / (np.maximum(depth, _MIN_DEPTH) * cosb))
    depth_next = np.maximum(depth - h * v * cosb, _MIN_DEPTH)
    return u_next, depth_next


def predict_box(box: BoundingBoxState, control: tuple[float, float], h: float,
                cam: CameraModel) -> BoundingBoxState:
    """Predict the box one timestep ahead under control (v, omega).

    Uses the planar pinhole image Jacobian restricted to forward and yaw
    velocities; the apparent size scales with the inverse depth change.
    """
    if box.depth_estimate <= 0:
        raise ValueError("depth_estimate must be positive")
    v, omega = control
    u, depth = _predict_u_depth(box.center_u, box.depth_estimate, v, omega, h,
                                cam.focal_px)
    scale = box.depth_estimate / max(float(depth), _MIN_DEPTH)
    return replace(box, center_u=float(u), depth_estimate=float(depth),
                   width=box.width * scale, height=box.height * scale)


def orient_cost(rollout: TrajectoryRollout, box: BoundingBoxState,
                cam: CameraModel) -> float:
    """Sum over segments of (predicted center_u)^2 differences.

    Telescopes to final^2 - initial^2 of the predicted box center; negative
    when the rollout improves centering.
    """
    u = box.center_u
    depth = box.depth_estimate
    total = 0.0
    for v, omega in rollout.controls:
        u_next, depth = _predict_u_depth(u, depth, v, omega, rollout.h,
                                         cam.focal_px)
        total += float(u_next) ** 2 - u ** 2
        u = float(u_next)
    return total


def zoom_cost(segment: tuple[float, float, float], d_obs: float,
              params: ZoomParams) -> float:
    """Approach reward for one segment; (v, theta_c, h) with d_obs in meters.

    Always <= 0: minimizing the total cost rewards moving toward the object
    while roughly facing it and farther than d_thresh.
    """
    v, theta_c, h = segment
    if h <= 0:
        raise ValueError("h must be positive")
    rho = max(d_obs - params.d_thresh, 0.0) / params.d_max
    return -v * max(math.cos(theta_c), 0.0) * h * rho


def build_rollout(start: Pose2D, v: float, omega: float, n: int, h: float,
                  grid: OccupancyGrid,
                  clearance: np.ndarray | None = None,
                  config: PlannerConfig | None = None) -> TrajectoryRollout:
    """Integrate a constant-control rollout and its collision-free profile."""
    config = config or PlannerConfig()
    if clearance is None:
        clearance = clearance_field(grid)
    x, y, theta = start.x, start.y, start.theta
    poses = [start]
    p = 1.0
    p_s = []
    for _ in range(n):
        x, y, theta = _step_pose(x, y, theta, v, omega, h)
        poses.append(Pose2D(x, y, theta))
        p *= _survival_factor(grid, clearance, x, y, config)
        p_s.append(p)
    return TrajectoryRollout(tuple((v, omega) for _ in range(n)), h,
                             tuple(poses), tuple(p_s))


def _survival_factor(grid: OccupancyGrid, clearance: np.ndarray,
                     x: float, y: float, config: PlannerConfig) -> float:
    if not grid.contains_world(x, y):
        return 0.0
    ix = int((x - grid.origin_x) / grid.resolution)
    iy = int((y - grid.origin_y) / grid.resolution)
    c = clearance[ix, iy]
    if c <= 0.0:
        return 0.0
    if c >= config.safe_clearance:
        return 1.0
    return math.exp(-config.clearance_decay * (config.safe_clearance - c))


def rollout_cost(rollout: TrajectoryRollout, goal: Pose2D,
                 box: BoundingBoxState | None, grid: OccupancyGrid,
                 cam: CameraModel, config: PlannerConfig | None = None) -> float:
    """Segment sum of p_s * progress + action + (1 - p_s) * collision.

    Orient and zoom terms live inside the progress term and are omitted
    when no box is tracked.
    """
    config = config or PlannerConfig()
    half_w2 = (cam.image_width / 2.0) ** 2
    u = box.center_u if box is not None else 0.0
    depth = box.depth_estimate if box is not None else 0.0
    total = 0.0
    prev_dist = rollout.poses[0].distance_to(goal)
    for i, (v, omega) in enumerate(rollout.controls):
        dist = rollout.poses[i + 1].distance_to(goal)
        progress = config.w_progress * (dist - prev_dist)
        prev_dist = dist
        if box is not None:
            theta_c = cam.u_to_bearing(u)
            progress += config.w_zoom * zoom_cost((v, theta_c, rollout.h),
                                                  depth, config.zoom)
            u_next, depth = _predict_u_depth(u, depth, v, omega, rollout.h,
                                             cam.focal_px)
            progress += config.w_orient * (float(u_next) ** 2 - u ** 2) / half_w2
            u = float(u_next)
        action = config.w_action * (v * v + omega * omega)
        p = rollout.p_s[i]
        total += p * progress + action + (1.0 - p) * config.collision_penalty
    return total


def select_control(current: Pose2D, box: BoundingBoxState | None, goal: Pose2D,
                   grid: OccupancyGrid, cam: CameraModel,
                   config: PlannerConfig | None = None,
                   clearance: np.ndarray | None = None) -> tuple[float, float]:
    """Evaluate the control lattice, return the first control of the argmin.

    Ties break by lower |omega| then lower |v|. When every rollout collides,
    falls back to rotating in place toward the goal bearing.
    """
    config = config or PlannerConfig()
    if clearance is None:
        clearance = clearance_field(grid)

    # nonuniform lattice, dense near zero so centering can settle finely
    vs = config.v_max * np.array([0.0, 0.05, 0.12, 0.25, 0.45, 0.7, 1.0])[:config.n_v]
    w_fracs = np.array([0.02, 0.06, 0.15, 0.4, 1.0])
    ws = np.concatenate([[0.0], w_fracs, -w_fracs]) * config.omega_max
    ws = np.sort(ws)[:config.n_omega] if config.n_omega < 11 else np.sort(ws)
    vv, ww = np.meshgrid(vs, ws, indexing="ij")
    vv = vv.ravel()
    ww = ww.ravel()
    m = vv.shape[0]
    n = config.n_segments
    h = config.h

    x = np.full(m, current.x)
    y = np.full(m, current.y)
    theta = np.full(m, current.theta)
    p = np.ones(m)
    collided = np.zeros(m, dtype=bool)
    total = np.zeros(m)
    prev_dist = np.full(m, math.hypot(current.x - goal.x, current.y - goal.y))

    if box is not None:
        u = np.full(m, box.center_u)
        depth = np.full(m, box.depth_estimate)
    half_w2 = (cam.image_width / 2.0) ** 2

    res = grid.resolution
    for _ in range(n):
        x = x + vv * np.cos(theta) * h
        y = y + vv * np.sin(theta) * h
        theta = theta + ww * h

        ix = np.floor((x - grid.origin_x) / res).astype(np.int64)
        iy = np.floor((y - grid.origin_y) / res).astype(np.int64)
        inb = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
        c = np.zeros(m)
        c[inb] = clearance[ix[inb], iy[inb]]
        sigma = np.where(c >= config.safe_clearance, 1.0,
                         np.exp(-config.clearance_decay
                                * (config.safe_clearance - c)))
        sigma = np.where(inb & (c > 0.0), sigma, 0.0)
        collided |= sigma == 0.0
        p = p * sigma

        dist = np.hypot(x - goal.x, y - goal.y)
        progress = config.w_progress * (dist - prev_dist)
        prev_dist = dist
        if box is not None:
            theta_c = np.arctan(u / cam.focal_px)
            rho = np.maximum(depth - config.zoom.d_thresh, 0.0) / config.zoom.d_max
            progress += config.w_zoom * (-vv * np.maximum(np.cos(theta_c), 0.0)
                                         * h * rho)
            u_next, depth = _predict_u_depth(u, depth, vv, ww, h, cam.focal_px)
            progress += config.w_orient * (u_next ** 2 - u ** 2) / half_w2
            u = u_next
        action = config.w_action * (vv * vv + ww * ww)
        total += p * progress + action + (1.0 - p) * config.collision_penalty

    if collided.all():
        bearing = current.bearing_to(goal.x, goal.y)
        omega = math.copysign(min(config.omega_max, abs(bearing) / h), bearing) \
            if bearing != 0.0 else config.omega_max
        return (0.0, omega)

    order = sorted(range(m), key=lambda i: (total[i], abs(ww[i]), abs(vv[i]), i))
    best = order[0]
    return (float(vv[best]), float(ww[best]))
