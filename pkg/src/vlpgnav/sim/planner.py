"""Global any-angle path planning on the occupancy grid.

Grid A* on an obstacle-inflated copy of the map followed by greedy
line-of-sight smoothing, so consecutive waypoints are mutually visible.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..geometry import OccupancyGrid, Pose2D, raycast

DEFAULT_INFLATION_M = 0.12

_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(-1, -1, _SQRT2), (-1, 0, 1.0), (-1, 1, _SQRT2),
              (0, -1, 1.0), (0, 1, 1.0),
              (1, -1, _SQRT2), (1, 0, 1.0), (1, 1, _SQRT2)]


class PlanningError(RuntimeError):
    """Goal unreachable or endpoint in collision."""


def inflate(grid: OccupancyGrid, radius_m: float) -> OccupancyGrid:
    """Occupied cells dilated by a metric radius."""
    from scipy import ndimage

    if radius_m <= 0:
        return grid.copy()
    cells = int(math.ceil(radius_m / grid.resolution))
    size = 2 * cells + 1
    yy, xx = np.mgrid[-cells:cells + 1, -cells:cells + 1]
    selem = (xx * xx + yy * yy) <= cells * cells
    occ = ndimage.binary_dilation(grid.occupancy, structure=selem)
    return OccupancyGrid(grid.width, grid.height, grid.resolution,
                         grid.origin_x, grid.origin_y, occ)


def nearest_free_cell(grid: OccupancyGrid, x: float, y: float,
                      max_radius_m: float = 1.0) -> tuple[int, int]:
    ix0, iy0 = grid.world_to_cell(x, y)
    if not grid.occupancy[ix0, iy0]:
        return ix0, iy0
    max_cells = int(max_radius_m / grid.resolution)
    best = None
    for r in range(1, max_cells + 1):
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                if max(abs(dx), abs(dy)) != r:
                    continue
                ix, iy = ix0 + dx, iy0 + dy
                if grid.in_bounds(ix, iy) and not grid.occupancy[ix, iy]:
                    d = dx * dx + dy * dy
                    if best is None or d < best[0]:
                        best = (d, ix, iy)
        if best is not None:
            return best[1], best[2]
    raise PlanningError(f"no free cell near ({x:.2f}, {y:.2f})")


def plan_global_path(grid: OccupancyGrid, start: Pose2D, goal: Pose2D,
                     inflation_m: float = DEFAULT_INFLATION_M
                     ) -> list[tuple[float, float]]:
    """Waypoints from start to goal; each consecutive pair line-of-sight clear.

    Endpoints are snapped to the nearest inflation-free cell so poses that
    hug furniture remain plannable.
    """
    inflated = inflate(grid, inflation_m)
    s = nearest_free_cell(inflated, start.x, start.y)
    g = nearest_free_cell(inflated, goal.x, goal.y)
    if s == g:
        return [(goal.x, goal.y)]

    came: dict[tuple[int, int], tuple[int, int]] = {}
    dist = {s: 0.0}
    h0 = math.hypot(g[0] - s[0], g[1] - s[1])
    heap = [(h0, 0.0, s)]
    occ = inflated.occupancy
    w, hgt = inflated.width, inflated.height
    found = False
    while heap:
        _, d, cur = heapq.heappop(heap)
        if cur == g:
            found = True
            break
        if d > dist.get(cur, math.inf):
            continue
        cx, cy = cur
        for dx, dy, c in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < hgt) or occ[nx, ny]:
                continue
            # no corner cutting on diagonal moves
            if dx != 0 and dy != 0 and (occ[cx + dx, cy] or occ[cx, cy + dy]):
                continue
            nd = d + c
            if nd < dist.get((nx, ny), math.inf):
                dist[(nx, ny)] = nd
                came[(nx, ny)] = cur
                heapq.heappush(heap, (nd + math.hypot(g[0] - nx, g[1] - ny),
                                      nd, (nx, ny)))
    if not found:
        raise PlanningError("goal unreachable")

    cells = [g]
    while cells[-1] != s:
        cells.append(came[cells[-1]])
    cells.reverse()
    pts = [inflated.cell_center(ix, iy) for ix, iy in cells]
    pts[0] = (start.x, start.y)
    pts[-1] = (goal.x, goal.y)

    # greedy line-of-sight shortcutting on the inflated map
    smoothed = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1:
            if raycast(inflated, pts[i], pts[j]) is None:
                break
            j -= 1
        smoothed.append(pts[j])
        i = j
    return smoothed[1:] if len(smoothed) > 1 else [(goal.x, goal.y)]


def path_length(path: list[tuple[float, float]],
                start: Pose2D | None = None) -> float:
    pts = ([(start.x, start.y)] if start is not None else []) + list(path)
    return sum(math.hypot(x2 - x1, y2 - y1)
               for (x1, y1), (x2, y2) in zip(pts, pts[1:]))
