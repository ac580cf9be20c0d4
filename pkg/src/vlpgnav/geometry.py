"""Poses, occupancy grids, field-of-view sectors, and grid visibility tests.

All other modules build on these primitives. Angles are radians, world
coordinates are meters, grids are row-major numpy arrays indexed (ix, iy)
with ix along world x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi

# grid traversal: parameter gap below which an x- and a y-boundary crossing
# count as one corner crossing (the grazed cells have zero-length chords)
_CORNER_EPS = 1e-12


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    """Planar pose (x, y, theta); theta normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def bearing_to(self, x: float, y: float) -> float:
        """Angle of (x, y) relative to this pose's heading, CCW positive."""
        return normalize_angle(math.atan2(y - self.y, x - self.x) - self.theta)


@dataclass(frozen=True)
class FovSector:
    """Circular-sector field of view anchored at a pose.

    half_angle in (0, pi/2], range_m > 0.
    """

    apex: Pose2D
    half_angle: float = math.pi / 4
    range_m: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.half_angle <= math.pi / 2):
            raise ValueError(f"half_angle must be in (0, pi/2], got {self.half_angle}")
        if self.range_m <= 0:
            raise ValueError(f"range must be positive, got {self.range_m}")

    def contains_point(self, x: float, y: float) -> bool:
        """Range/angle membership only; boundary ties count as inside."""
        dx, dy = x - self.apex.x, y - self.apex.y
        if dx * dx + dy * dy > self.range_m * self.range_m:
            return False
        if dx == 0.0 and dy == 0.0:
            return True
        return abs(self.apex.bearing_to(x, y)) <= self.half_angle


class GridIndexError(IndexError):
    """Cell or world coordinate outside grid bounds."""


class OccupancyGrid:
    """2D occupancy grid with world-frame origin at the corner of cell (0, 0)."""

    def __init__(self, width: int, height: int, resolution: float,
                 origin_x: float = 0.0, origin_y: float = 0.0,
                 occupancy: np.ndarray | None = None):
        if resolution <= 0:
            raise ValueError(f"resolution must be positive, got {resolution}")
        if width <= 0 or height <= 0:
            raise ValueError("grid dimensions must be positive")
        self.width = int(width)
        self.height = int(height)
        self.resolution = float(resolution)
        self.origin_x = float(origin_x)
        self.origin_y = float(origin_y)
        if occupancy is None:
            self.occupancy = np.zeros((self.width, self.height), dtype=bool)
        else:
            occupancy = np.asarray(occupancy, dtype=bool)
            if occupancy.shape != (self.width, self.height):
                raise ValueError("occupancy shape mismatch")
            self.occupancy = occupancy

    # -- coordinate transforms ------------------------------------------------

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.origin_x) / self.resolution))
        iy = int(math.floor((y - self.origin_y) / self.resolution))
        if not self.in_bounds(ix, iy):
            raise GridIndexError(f"point ({x:.3f}, {y:.3f}) outside grid")
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        if not self.in_bounds(ix, iy):
            raise GridIndexError(f"cell ({ix}, {iy}) outside grid")
        return (self.origin_x + (ix + 0.5) * self.resolution,
                self.origin_y + (iy + 0.5) * self.resolution)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def contains_world(self, x: float, y: float) -> bool:
        return (self.origin_x <= x < self.origin_x + self.width * self.resolution
                and self.origin_y <= y < self.origin_y + self.height * self.resolution)

    def is_occupied(self, ix: int, iy: int) -> bool:
        if not self.in_bounds(ix, iy):
            raise GridIndexError(f"cell ({ix}, {iy}) outside grid")
        return bool(self.occupancy[ix, iy])

    def set_occupied(self, ix: int, iy: int, value: bool = True):
        if not self.in_bounds(ix, iy):
            raise GridIndexError(f"cell ({ix}, {iy}) outside grid")
        self.occupancy[ix, iy] = value

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.resolution,
                             self.origin_x, self.origin_y, self.occupancy.copy())

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(cx, cy) arrays of shape (width, height) with cell-center coordinates."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin_y + (np.arange(self.height) + 0.5) * self.resolution
        return np.meshgrid(xs, ys, indexing="ij")

    # -- serialization --------------------------------------------------------
    # Byte layout: 8-bit grayscale PNG, one pixel per cell, pixel (col, row) =
    # cell (ix=col, iy=height-1-row) so the image renders with +y up.
    # Occupied = 0 (black), free = 255 (white). Side-car text file (same stem,
    # ".meta") holds "origin_x origin_y resolution" on one line.

    def save(self, png_path: str | Path):
        from PIL import Image

        png_path = Path(png_path)
        img = np.where(self.occupancy, 0, 255).astype(np.uint8)
        # transpose to (row, col) = (y-flipped, x)
        Image.fromarray(img.T[::-1, :], mode="L").save(png_path)
        meta = png_path.with_suffix(".meta")
        meta.write_text(f"{self.origin_x} {self.origin_y} {self.resolution}\n")

    @classmethod
    def load(cls, png_path: str | Path) -> "OccupancyGrid":
        from PIL import Image

        png_path = Path(png_path)
        img = np.asarray(Image.open(png_path).convert("L"))
        occupancy = (img[::-1, :].T == 0)
        ox, oy, res = (float(t) for t in
                       png_path.with_suffix(".meta").read_text().split())
        return cls(occupancy.shape[0], occupancy.shape[1], res, ox, oy, occupancy)


# -- raycasting ----------------------------------------------------------------

def raycast(grid: OccupancyGrid, from_xy: tuple[float, float],
            to_xy: tuple[float, float]) -> tuple[int, int] | None:
    """Walk cells on the segment in order; return the first occupied cell.

    Returns None when the segment is clear. Both endpoints must lie inside
    the grid. Uses an exact DDA traversal, so every cell whose interior the
    segment crosses is visited.
    """
    x0, y0 = from_xy
    x1, y1 = to_xy
    if not grid.contains_world(x0, y0) or not grid.contains_world(x1, y1):
        raise GridIndexError("raycast endpoint outside grid")
    for ix, iy in traverse_cells(grid, x0, y0, x1, y1):
        if grid.occupancy[ix, iy]:
            return (ix, iy)
    return None


def traverse_cells(grid: OccupancyGrid, x0: float, y0: float,
                   x1: float, y1: float):
    """Yield (ix, iy) cells along the segment, start cell first."""
    res = grid.resolution
    ix = int(math.floor((x0 - grid.origin_x) / res))
    iy = int(math.floor((y0 - grid.origin_y) / res))
    ix1 = int(math.floor((x1 - grid.origin_x) / res))
    iy1 = int(math.floor((y1 - grid.origin_y) / res))
    ix = min(max(ix, 0), grid.width - 1)
    iy = min(max(iy, 0), grid.height - 1)
    ix1 = min(max(ix1, 0), grid.width - 1)
    iy1 = min(max(iy1, 0), grid.height - 1)

    dx = x1 - x0
    dy = y1 - y0
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    # parametric distance to the next x/y cell boundary
    if dx != 0:
        next_bx = grid.origin_x + (ix + (1 if dx > 0 else 0)) * res
        t_max_x = (next_bx - x0) / dx
        t_delta_x = res / abs(dx)
    else:
        t_max_x = math.inf
        t_delta_x = math.inf
    if dy != 0:
        next_by = grid.origin_y + (iy + (1 if dy > 0 else 0)) * res
        t_max_y = (next_by - y0) / dy
        t_delta_y = res / abs(dy)
    else:
        t_max_y = math.inf
        t_delta_y = math.inf

    yield (ix, iy)
    while (ix, iy) != (ix1, iy1):
        if abs(t_max_x - t_max_y) <= _CORNER_EPS:
            # corner crossing: the segment only touches the corner of the
            # two axis-adjacent cells, so step diagonally past them
            ix += step_x
            iy += step_y
            t_max_x += t_delta_x
            t_max_y += t_delta_y
        elif t_max_x < t_max_y:
            ix += step_x
            t_max_x += t_delta_x
        else:
            iy += step_y
            t_max_y += t_delta_y
        if not grid.in_bounds(ix, iy):
            return
        yield (ix, iy)


def _batch_visible(grid: OccupancyGrid, apex_xy: tuple[float, float],
                   targets: np.ndarray, ignore: np.ndarray | None = None) -> np.ndarray:
    """Vectorized DDA visibility from one apex to many cell centers.

    targets: (n, 2) int cell indices. A target is visible when no occupied
    cell other than the apex cell and the target itself lies on the segment
    from the apex to the target's center. `ignore` is an optional boolean
    mask over the grid of cells that never block (used for object footprints).
    """
    n = targets.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    res = grid.resolution
    x0, y0 = apex_xy
    ax = int(math.floor((x0 - grid.origin_x) / res))
    ay = int(math.floor((y0 - grid.origin_y) / res))

    blocking = grid.occupancy.copy()
    if ignore is not None:
        blocking &= ~ignore
    if grid.in_bounds(ax, ay):
        blocking = blocking.copy()
        blocking[ax, ay] = False

    tx = grid.origin_x + (targets[:, 0] + 0.5) * res
    ty = grid.origin_y + (targets[:, 1] + 0.5) * res
    dx = tx - x0
    dy = ty - y0

    ix = np.full(n, min(max(ax, 0), grid.width - 1), dtype=np.int64)
    iy = np.full(n, min(max(ay, 0), grid.height - 1), dtype=np.int64)
    step_x = np.where(dx > 0, 1, -1)
    step_y = np.where(dy > 0, 1, -1)

    with np.errstate(divide="ignore", invalid="ignore"):
        next_bx = grid.origin_x + (ix + (dx > 0)) * res
        t_max_x = np.where(dx != 0, (next_bx - x0) / dx, np.inf)
        t_delta_x = np.where(dx != 0, res / np.abs(dx), np.inf)
        next_by = grid.origin_y + (iy + (dy > 0)) * res
        t_max_y = np.where(dy != 0, (next_by - y0) / dy, np.inf)
        t_delta_y = np.where(dy != 0, res / np.abs(dy), np.inf)

    visible = np.ones(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    # apex cell never blocks; check target-cell arrival before blocking test
    max_steps = grid.width + grid.height + 2
    for _ in range(max_steps):
        at_target = (ix == targets[:, 0]) & (iy == targets[:, 1])
        active &= ~at_target
        if not active.any():
            break
        # on corner crossings step both axes: the segment touches only the
        # corner of the two axis-adjacent cells, so neither can block
        with np.errstate(invalid="ignore"):
            near = np.abs(t_max_x - t_max_y) <= _CORNER_EPS
        take_x = active & (near | (t_max_x < t_max_y))
        take_y = active & (near | (t_max_y < t_max_x))
        ix[take_x] += step_x[take_x]
        t_max_x[take_x] += t_delta_x[take_x]
        iy[take_y] += step_y[take_y]
        t_max_y[take_y] += t_delta_y[take_y]
        oob = active & ((ix < 0) | (ix >= grid.width) | (iy < 0) | (iy >= grid.height))
        visible[oob] = False
        active &= ~oob
        at_target = (ix == targets[:, 0]) & (iy == targets[:, 1])
        hit = active & ~at_target & blocking[np.clip(ix, 0, grid.width - 1),
                                             np.clip(iy, 0, grid.height - 1)]
        visible[hit] = False
        active &= ~hit
    return visible


def cells_in_fov(grid: OccupancyGrid, fov: FovSector,
                 occlusion_aware: bool = False) -> set[tuple[int, int]]:
    """Free cells whose center lies in the sector, optionally occlusion-clipped.

    With occlusion_aware, a cell is excluded when the segment from the apex
    to the cell center crosses an occupied cell (apex cell exempt).
    """
    res = grid.resolution
    r = fov.range_m
    lo_ix = max(0, int(math.floor((fov.apex.x - r - grid.origin_x) / res)))
    hi_ix = min(grid.width - 1, int(math.floor((fov.apex.x + r - grid.origin_x) / res)))
    lo_iy = max(0, int(math.floor((fov.apex.y - r - grid.origin_y) / res)))
    hi_iy = min(grid.height - 1, int(math.floor((fov.apex.y + r - grid.origin_y) / res)))
    if lo_ix > hi_ix or lo_iy > hi_iy:
        return set()

    ixs, iys = np.meshgrid(np.arange(lo_ix, hi_ix + 1),
                           np.arange(lo_iy, hi_iy + 1), indexing="ij")
    cx = grid.origin_x + (ixs + 0.5) * res
    cy = grid.origin_y + (iys + 0.5) * res
    dx = cx - fov.apex.x
    dy = cy - fov.apex.y
    dist2 = dx * dx + dy * dy
    in_range = dist2 <= r * r
    ang = np.arctan2(dy, dx) - fov.apex.theta
    ang = np.arctan2(np.sin(ang), np.cos(ang))
    in_angle = np.abs(ang) <= fov.half_angle
    # the apex's own cell is inside regardless of angle
    at_apex = dist2 == 0.0
    free = ~grid.occupancy[ixs, iys]
    mask = free & in_range & (in_angle | at_apex)

    cand = np.stack([ixs[mask], iys[mask]], axis=1)
    if occlusion_aware and cand.shape[0] > 0:
        if grid.contains_world(fov.apex.x, fov.apex.y):
            vis = _batch_visible(grid, (fov.apex.x, fov.apex.y), cand)
        else:
            # apex outside the grid: clip each segment to the grid boundary
            # and test the in-grid remainder (out-of-grid space treated free)
            vis = np.array([
                not _clipped_segment_blocked(grid, (fov.apex.x, fov.apex.y),
                                             grid.cell_center(int(a), int(b)),
                                             (int(a), int(b)))
                for a, b in cand])
        cand = cand[vis]
    return {(int(a), int(b)) for a, b in cand}


def _clipped_segment_blocked(grid: OccupancyGrid, p0: tuple[float, float],
                             p1: tuple[float, float],
                             target: tuple[int, int]) -> bool:
    """Occlusion test with p0 possibly outside the grid; target cell exempt."""
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    t0 = 0.0
    if not grid.contains_world(x0, y0):
        # bisect for the entry point; p1 (a cell center) is always inside
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = (lo + hi) / 2
            if grid.contains_world(x0 + mid * dx, y0 + mid * dy):
                hi = mid
            else:
                lo = mid
        t0 = hi
    sx, sy = x0 + t0 * dx, y0 + t0 * dy
    for ix, iy in traverse_cells(grid, sx, sy, x1, y1):
        if (ix, iy) != target and grid.occupancy[ix, iy]:
            return True
    return False


def clearance_field(grid: OccupancyGrid) -> np.ndarray:
    """Per-cell distance in meters to the nearest occupied cell.

    Occupied cells have clearance 0. Computed with an exact Euclidean
    distance transform.
    """
    from scipy import ndimage

    free = ~grid.occupancy
    return ndimage.distance_transform_edt(free) * grid.resolution


def fov_overlap_area(a: FovSector, union_of: list[FovSector],
                     grid: OccupancyGrid, occlusion_aware: bool = False) -> int:
    """|cells_in_fov(a) ∩ ∪_b cells_in_fov(b)| on the grid discretization."""
    if not union_of:
        raise ValueError("union_of must be non-empty")
    own = cells_in_fov(grid, a, occlusion_aware)
    union: set[tuple[int, int]] = set()
    for b in union_of:
        union |= cells_in_fov(grid, b, occlusion_aware)
    return len(own & union)
