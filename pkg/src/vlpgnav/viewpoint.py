"""Initial viewpoint selection from scored pose-graph nodes.

Pipeline: lift top-k poses to 4D (x, y, cos, sin) to remove the heading
wrap, cluster with DBSCAN to drop outliers, pick the largest cluster, and
return the member whose field of view overlaps the union of the other
members' views the most.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingProvider, PromptPair
from .geometry import FovSector, OccupancyGrid, Pose2D, cells_in_fov
from .graph import NodeScore, Vlpg, top_k

NOISE = -1

DEFAULT_ANGLE_SCALE = 1.0
DEFAULT_DBSCAN_EPS = 0.8
DEFAULT_DBSCAN_MIN_PTS = 3


@dataclass(frozen=True)
class LiftedViewpoint:
    """Pose lifted to (x, y, s·cosθ, s·sinθ) for wrap-free clustering."""

    source: int
    coords: tuple[float, float, float, float]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords)


@dataclass(frozen=True)
class ViewpointCluster:
    members: tuple[Pose2D, ...]
    member_ids: tuple[int, ...]
    label: int

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must be non-empty")
        if len(self.members) != len(self.member_ids):
            raise ValueError("members/ids length mismatch")


@dataclass
class ViewpointConfig:
    angle_scale: float = DEFAULT_ANGLE_SCALE
    dbscan_eps: float = DEFAULT_DBSCAN_EPS
    dbscan_min_pts: int = DEFAULT_DBSCAN_MIN_PTS
    top_k: int = 20
    fov_half_angle: float = math.pi / 4
    fov_range: float = 3.0
    occlusion_aware: bool = False


def lift(pose: Pose2D, angle_scale: float = DEFAULT_ANGLE_SCALE,
         source: int = -1) -> LiftedViewpoint:
    return LiftedViewpoint(source, (pose.x, pose.y,
                                    angle_scale * math.cos(pose.theta),
                                    angle_scale * math.sin(pose.theta)))


def dbscan(points: list[LiftedViewpoint], eps: float, min_pts: int) -> list[int]:
    """DBSCAN over Euclidean distance in the lifted 4D space.

    Returns one label per input point in input order; noise points get -1.
    Cluster ids are assigned in order of first-discovered core point, so
    labels are deterministic for a given input order.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    n = len(points)
    if n == 0:
        return []
    coords = np.asarray([p.coords for p in points])
    d2 = np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=2)
    neighbors = d2 <= eps * eps  # includes self
    is_core = neighbors.sum(axis=1) >= min_pts

    labels = [None] * n
    cluster = 0
    for i in range(n):
        if labels[i] is not None or not is_core[i]:
            continue
        labels[i] = cluster
        frontier = [i]
        while frontier:
            j = frontier.pop()
            for m in np.flatnonzero(neighbors[j]):
                if labels[m] is None:
                    labels[m] = cluster
                    if is_core[m]:
                        frontier.append(int(m))
        cluster += 1
    return [NOISE if lbl is None else lbl for lbl in labels]


def best_guess(cluster: ViewpointCluster, grid: OccupancyGrid,
               half_angle: float = math.pi / 4, range_m: float = 3.0,
               occlusion_aware: bool = False) -> Pose2D:
    """Member whose FOV overlaps the union of the others' FOVs the most.

    Ties break by larger own-FOV cell count, then lower member id.
    """
    members = list(zip(cluster.member_ids, cluster.members))
    if len(members) == 1:
        return members[0][1]
    fovs = {mid: cells_in_fov(grid, FovSector(pose, half_angle, range_m),
                              occlusion_aware)
            for mid, pose in members}
    best = None
    for mid, pose in members:
        union: set[tuple[int, int]] = set()
        for other_id, _ in members:
            if other_id != mid:
                union |= fovs[other_id]
        key = (len(fovs[mid] & union), len(fovs[mid]), -mid)
        if best is None or key > best[0]:
            best = (key, pose)
    return best[1]


NO_PRIOR = "no-prior"


@dataclass(frozen=True)
class ViewpointQuery:
    """Outcome of the initial-viewpoint pipeline."""

    pose: Pose2D | None
    cluster: ViewpointCluster | None

    @property
    def no_prior(self) -> bool:
        return self.pose is None


def query_viewpoint(graph: Vlpg, obj: str, provider: EmbeddingProvider,
                    grid: OccupancyGrid,
                    config: ViewpointConfig | None = None) -> ViewpointQuery:
    """score -> top-k -> lift -> cluster -> largest cluster -> best guess."""
    config = config or ViewpointConfig()
    if len(graph) == 0:
        return ViewpointQuery(None, None)
    scores = graph.score_nodes(PromptPair.for_object(obj), provider)
    selected = top_k(scores, config.top_k)
    if not selected:
        return ViewpointQuery(None, None)
    lifted = [lift(s.node.pose, config.angle_scale, s.node.id) for s in selected]
    labels = dbscan(lifted, config.dbscan_eps, config.dbscan_min_pts)
    by_score = {s.node.id: s.score for s in selected}

    clusters: dict[int, list[NodeScore]] = {}
    for s, lbl in zip(selected, labels):
        if lbl != NOISE:
            clusters.setdefault(lbl, []).append(s)
    if not clusters:
        return ViewpointQuery(None, None)
    # largest cluster; size ties broken by higher mean score, then lower label
    def cluster_key(item):
        lbl, mem = item
        mean_score = sum(by_score[s.node.id] for s in mem) / len(mem)
        return (-len(mem), -mean_score, lbl)

    label, members = min(clusters.items(), key=cluster_key)
    vc = ViewpointCluster(tuple(s.node.pose for s in members),
                          tuple(s.node.id for s in members), label)
    pose = best_guess(vc, grid, config.fov_half_angle, config.fov_range,
                      config.occlusion_aware)
    return ViewpointQuery(pose, vc)


def initial_viewpoint(graph: Vlpg, obj: str, provider: EmbeddingProvider,
                      grid: OccupancyGrid,
                      config: ViewpointConfig | None = None):
    """Pose2D best guess, or the NO_PRIOR sentinel when nothing clusters."""
    q = query_viewpoint(graph, obj, provider, grid, config)
    return NO_PRIOR if q.no_prior else q.pose
