"""Synthetic camera: visibility-based observations and object detections.

Visibility is ground-truth raycasting on the occupancy grid; an object's
own footprint never occludes itself. Detections project the visible
footprint centroid through the pinhole model, so ``center_u`` follows the
``focal * tan(bearing)`` convention shared with the centering planner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..centering import BoundingBoxState, CameraModel
from ..embedding import CameraObservation
from ..geometry import FovSector, OccupancyGrid, Pose2D, _batch_visible
from .world import ObjectInstance, WorldModel


@dataclass(frozen=True)
class Detection:
    label: str
    box: BoundingBoxState
    confidence: float


@dataclass
class SensorConfig:
    fov_half_angle: float = math.pi / 4
    fov_range: float = 3.0
    pixel_noise_std: float = 0.0
    false_negative_rate: float = 0.0

    def camera(self, image_width: int = 640,
               image_height: int = 480) -> CameraModel:
        return CameraModel.from_fov(2 * self.fov_half_angle, image_width,
                                    image_height)


def visible_object_cells(world: WorldModel, pose: Pose2D,
                         obj: ObjectInstance,
                         config: SensorConfig) -> np.ndarray:
    """(n, 2) indices of the object's footprint cells visible from pose."""
    grid = world.grid
    ixs, iys = np.nonzero(obj.footprint)
    if ixs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    cx = grid.origin_x + (ixs + 0.5) * grid.resolution
    cy = grid.origin_y + (iys + 0.5) * grid.resolution
    dx = cx - pose.x
    dy = cy - pose.y
    dist2 = dx * dx + dy * dy
    ang = np.arctan2(dy, dx) - pose.theta
    ang = np.arctan2(np.sin(ang), np.cos(ang))
    in_sector = (dist2 <= config.fov_range ** 2) & \
        (np.abs(ang) <= config.fov_half_angle)
    cand = np.stack([ixs[in_sector], iys[in_sector]], axis=1)
    if cand.shape[0] == 0:
        return cand
    vis = _batch_visible(grid, (pose.x, pose.y), cand, ignore=obj.footprint)
    return cand[vis]


def visible_fraction(world: WorldModel, pose: Pose2D, obj: ObjectInstance,
                     config: SensorConfig) -> float:
    """Fraction of footprint cells visible, attenuated by distance.

    Attenuation (1 - d/range) makes close head-on views weigh more in the
    synthetic embedding, mirroring how apparent area shrinks with range.
    """
    cells = visible_object_cells(world, pose, obj, config)
    total = obj.cell_count()
    if total == 0 or cells.shape[0] == 0:
        return 0.0
    grid = world.grid
    cx = grid.origin_x + (cells[:, 0] + 0.5) * grid.resolution
    cy = grid.origin_y + (cells[:, 1] + 0.5) * grid.resolution
    d = float(np.hypot(cx - pose.x, cy - pose.y).mean())
    atten = max(0.0, 1.0 - 0.5 * d / config.fov_range)
    return (cells.shape[0] / total) * atten


def observe(world: WorldModel, pose: Pose2D,
            config: SensorConfig) -> CameraObservation:
    """Visible object labels with area fractions, for the synthetic embedder.

    The context signature quantizes the pose (0.5 m, 45 deg bins) so views
    from different spots stay apart in embedding space.
    """
    items = []
    for obj in world.objects:
        frac = visible_fraction(world, pose, obj, config)
        if frac > 0.0:
            items.append((obj.label, frac))
    items.sort(key=lambda lf: lf[0])
    context = (int(math.floor(pose.x / 0.5)), int(math.floor(pose.y / 0.5)),
               int(math.floor((pose.theta + math.pi) / (math.pi / 4))) % 8)
    return CameraObservation.of(items, context)


def render_detection(world: WorldModel, pose: Pose2D, cam: CameraModel,
                     query_label: str, config: SensorConfig,
                     rng: np.random.Generator | None = None
                     ) -> Detection | None:
    """Detection of the best-visible instance matching the query, if any."""
    best = None
    for obj in world.objects_with_label(query_label):
        cells = visible_object_cells(world, pose, obj, config)
        if cells.shape[0] == 0:
            continue
        if best is None or cells.shape[0] > best[1].shape[0]:
            best = (obj, cells)
    if best is None:
        return None
    if rng is not None and config.false_negative_rate > 0.0:
        if rng.random() < config.false_negative_rate:
            return None

    obj, cells = best
    grid = world.grid
    cx = grid.origin_x + (cells[:, 0] + 0.5) * grid.resolution
    cy = grid.origin_y + (cells[:, 1] + 0.5) * grid.resolution
    gx, gy = float(cx.mean()), float(cy.mean())
    bearing = pose.bearing_to(gx, gy)
    rng_to_obj = math.hypot(gx - pose.x, gy - pose.y)
    center_u = cam.bearing_to_u(bearing)

    size_m = math.sqrt(obj.cell_count()) * grid.resolution
    width_px = max(2.0, cam.focal_px * size_m / max(rng_to_obj, 1e-6))
    height_px = width_px * 1.2
    if rng is not None and config.pixel_noise_std > 0.0:
        center_u += rng.normal(0.0, config.pixel_noise_std)
    half_w = cam.image_width / 2.0
    center_u = max(-half_w, min(half_w, center_u))

    confidence = cells.shape[0] / max(1, obj.cell_count())
    box = BoundingBoxState(center_u=center_u, center_v=0.0, width=width_px,
                           height=height_px, depth_estimate=rng_to_obj)
    return Detection(obj.label, box, confidence)


def object_in_view(world: WorldModel, pose: Pose2D, query_label: str,
                   config: SensorConfig) -> bool:
    """Ground-truth success test: any matching footprint cell raycast-visible."""
    return any(
        visible_object_cells(world, pose, obj, config).shape[0] > 0
        for obj in world.objects_with_label(query_label))


def visible_cells_mask(grid: OccupancyGrid, pose: Pose2D,
                       config: SensorConfig) -> np.ndarray:
    """Boolean mask of free cells visible from a pose (for exploration).

    Occlusion uses angular shadow binning rather than exact per-cell
    raycasts: a cell is hidden when an occupied cell in the same angular
    bin lies closer. Cheap enough to run every few control ticks.
    """
    res = grid.resolution
    r = config.fov_range
    lo_ix = max(0, int((pose.x - r - grid.origin_x) / res))
    hi_ix = min(grid.width - 1, int((pose.x + r - grid.origin_x) / res))
    lo_iy = max(0, int((pose.y - r - grid.origin_y) / res))
    hi_iy = min(grid.height - 1, int((pose.y + r - grid.origin_y) / res))
    mask = np.zeros((grid.width, grid.height), dtype=bool)
    if lo_ix > hi_ix or lo_iy > hi_iy:
        return mask

    ixs, iys = np.meshgrid(np.arange(lo_ix, hi_ix + 1),
                           np.arange(lo_iy, hi_iy + 1), indexing="ij")
    dx = grid.origin_x + (ixs + 0.5) * res - pose.x
    dy = grid.origin_y + (iys + 0.5) * res - pose.y
    dist = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx) - pose.theta
    ang = np.arctan2(np.sin(ang), np.cos(ang))
    occ = grid.occupancy[lo_ix:hi_ix + 1, lo_iy:hi_iy + 1]

    # bin width ~ one cell at full range, so shadows are cell-accurate
    bin_w = res / r
    nbins = int(2.0 * math.pi / bin_w) + 1
    bins = ((ang + math.pi) / bin_w).astype(np.int64) % nbins

    blocker_r = np.full(nbins, np.inf)
    occ_flat = occ.ravel()
    np.minimum.at(blocker_r, bins.ravel()[occ_flat], dist.ravel()[occ_flat])
    # occupied cells cast shadows into adjacent bins too (finite cell width)
    blocker_r = np.minimum(blocker_r, np.roll(blocker_r, 1))
    blocker_r = np.minimum(blocker_r, np.roll(blocker_r, -1))

    in_sector = (~occ) & (dist <= r) & (np.abs(ang) <= config.fov_half_angle)
    visible = in_sector & (dist <= blocker_r[bins] + 0.5 * res)
    mask[lo_ix:hi_ix + 1, lo_iy:hi_iy + 1] = visible
    return mask
