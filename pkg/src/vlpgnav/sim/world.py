"""Deterministic 2D household world: grid, labeled objects, scripted events.

World files are JSON. Schema::

    {
      "name": "minimal",
      "grid": {"resolution": 0.05, "width_m": 6.0, "height_m": 6.0,
               "origin": [0.0, 0.0], "border_wall": true},
      "walls": [ [[x, y], ...polygon in meters], ... ],
      "objects": [ {"label": "plant", "polygon": [[x, y], ...],
                    "height_class": "floor" | "elevated"}, ... ],
      "events": [ {"at_time": 0.0, "action": "add_obstacle",
                   "polygon": [...]},
                  {"at_time": 0.0, "action": "remove_object",
                   "label": "plant"},
                  {"at_time": 0.0, "action": "move_object",
                   "label": "plant", "offset": [dx, dy]} ],
      "robot_start": [x, y, theta]
    }

Object footprints are rasterized into the occupancy grid; an object never
occludes itself in visibility tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..geometry import OccupancyGrid, Pose2D


def rasterize_polygon(grid: OccupancyGrid, polygon) -> np.ndarray:
    """Boolean mask of cells whose center lies inside the polygon."""
    poly = np.asarray(polygon, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[0] < 3:
        raise ValueError("polygon needs at least 3 vertices")
    cx, cy = grid.cell_centers()
    inside = np.zeros(cx.shape, dtype=bool)
    n = poly.shape[0]
    # even-odd crossing test, vectorized over cell centers
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = ((y1 > cy) != (y2 > cy))
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (cx < x_at)
    return inside


@dataclass
class ObjectInstance:
    label: str
    footprint: np.ndarray  # boolean mask over the grid
    height_class: str = "floor"
    polygon: list = field(default_factory=list)

    def centroid(self, grid: OccupancyGrid) -> tuple[float, float]:
        ixs, iys = np.nonzero(self.footprint)
        if ixs.size == 0:
            raise ValueError(f"object {self.label} has empty footprint")
        cx = grid.origin_x + (ixs.mean() + 0.5) * grid.resolution
        cy = grid.origin_y + (iys.mean() + 0.5) * grid.resolution
        return cx, cy

    def cell_count(self) -> int:
        return int(self.footprint.sum())


@dataclass
class Event:
    at_time: float
    action: str
    params: dict


@dataclass
class RobotState:
    pose: Pose2D
    v: float = 0.0
    omega: float = 0.0
    contact: bool = False


class WorldModel:
    """Static grid plus objects and pending scripted events."""

    def __init__(self, name: str, grid: OccupancyGrid,
                 objects: list[ObjectInstance], events: list[Event],
                 robot_start: Pose2D,
                 static_occupancy: np.ndarray | None = None):
        self.name = name
        self.grid = grid
        self.objects = objects
        self.events = sorted(events, key=lambda e: e.at_time)
        self.robot_start = robot_start
        self._pending = list(self.events)
        self._static_occ = (grid.occupancy.copy() if static_occupancy is None
                            else static_occupancy)
        self._rebuild_grid_objects()

    def _rebuild_grid_objects(self):
        """Re-stamp object footprints onto the static grid."""
        occ = self._static_occ.copy()
        for obj in self.objects:
            occ |= obj.footprint
        self.grid.occupancy = occ

    def apply_events(self, t: float) -> bool:
        """Apply all events with at_time <= t; returns True if any fired."""
        fired = False
        while self._pending and self._pending[0].at_time <= t:
            ev = self._pending.pop(0)
            self._apply(ev)
            fired = True
        return fired

    def _apply(self, ev: Event):
        if ev.action == "add_obstacle":
            self._static_occ |= rasterize_polygon(self.grid, ev.params["polygon"])
        elif ev.action == "remove_object":
            self.objects = [o for o in self.objects
                            if o.label != ev.params["label"]]
        elif ev.action == "move_object":
            dx, dy = ev.params["offset"]
            for i, obj in enumerate(self.objects):
                if obj.label == ev.params["label"]:
                    poly = [[x + dx, y + dy] for x, y in obj.polygon]
                    self.objects[i] = replace(
                        obj, polygon=poly,
                        footprint=rasterize_polygon(self.grid, poly))
        elif ev.action == "add_object":
            self.objects.append(ObjectInstance(
                ev.params["label"],
                rasterize_polygon(self.grid, ev.params["polygon"]),
                ev.params.get("height_class", "floor"),
                ev.params["polygon"]))
        else:
            raise ValueError(f"unknown event action {ev.action!r}")
        self._rebuild_grid_objects()

    def objects_with_label(self, label: str) -> list[ObjectInstance]:
        return [o for o in self.objects if o.label == label]

    def copy(self, include_events: bool = True) -> "WorldModel":
        grid = OccupancyGrid(self.grid.width, self.grid.height,
                             self.grid.resolution, self.grid.origin_x,
                             self.grid.origin_y)
        return WorldModel(
            self.name, grid,
            [replace(o, footprint=o.footprint.copy()) for o in self.objects],
            list(self.events) if include_events else [],
            self.robot_start, static_occupancy=self._static_occ.copy())

    @classmethod
    def from_dict(cls, doc: dict, extra_events: list[dict] | None = None
                  ) -> "WorldModel":
        g = doc["grid"]
        res = float(g["resolution"])
        ox, oy = g.get("origin", [0.0, 0.0])
        width = int(round(g["width_m"] / res))
        height = int(round(g["height_m"] / res))
        grid = OccupancyGrid(width, height, res, ox, oy)

        static = np.zeros((width, height), dtype=bool)
        if g.get("border_wall", True):
            static[0, :] = static[-1, :] = True
            static[:, 0] = static[:, -1] = True
        for poly in doc.get("walls", []):
            static |= rasterize_polygon(grid, poly)

        objects = []
        for spec in doc.get("objects", []):
            fp = rasterize_polygon(grid, spec["polygon"])
            objects.append(ObjectInstance(spec["label"], fp,
                                          spec.get("height_class", "floor"),
                                          spec["polygon"]))

        events = [Event(float(e.get("at_time", 0.0)), e["action"],
                        {k: v for k, v in e.items()
                         if k not in ("at_time", "action")})
                  for e in list(doc.get("events", [])) + list(extra_events or [])]

        start = doc.get("robot_start", [width * res / 2, height * res / 2, 0.0])
        return cls(doc.get("name", "world"), grid, objects, events,
                   Pose2D(*start), static_occupancy=static)

    @classmethod
    def load(cls, path: str | Path,
             extra_events: list[dict] | None = None) -> "WorldModel":
        return cls.from_dict(json.loads(Path(path).read_text()), extra_events)


def step(world: WorldModel, robot: RobotState, control: tuple[float, float],
         dt: float, rng: np.random.Generator | None = None,
         pose_noise_std: tuple[float, float] = (0.0, 0.0)) -> RobotState:
    """Unicycle integration; motion into an occupied cell halts the robot."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, omega = control
    pose = robot.pose
    nx = pose.x + v * math.cos(pose.theta) * dt
    ny = pose.y + v * math.sin(pose.theta) * dt
    ntheta = pose.theta + omega * dt
    if rng is not None and (pose_noise_std[0] > 0 or pose_noise_std[1] > 0):
        nx += rng.normal(0.0, pose_noise_std[0])
        ny += rng.normal(0.0, pose_noise_std[0])
        ntheta += rng.normal(0.0, pose_noise_std[1])

    contact = False
    grid = world.grid
    if not grid.contains_world(nx, ny):
        nx, ny = pose.x, pose.y
        contact = True
    else:
        ix, iy = grid.world_to_cell(nx, ny)
        if grid.occupancy[ix, iy]:
            nx, ny = pose.x, pose.y
            contact = True
    return RobotState(Pose2D(nx, ny, ntheta), v if not contact else 0.0,
                      omega, contact)
