"""Point-cloud clustering and click-to-target resolution.

DBSCAN groups the rendered cloud so a click anywhere on an object snaps
to that object's centroid; the grasp approach is a straight constant-speed
segment from the gripper to the chosen centroid.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .sim.render import PointCloud
from .sim.retime import Trajectory, retime_constant_speed

DEFAULT_EPS = 0.02
DEFAULT_MIN_PTS = 4

NOISE = -1


class PerceptionError(ValueError):
    pass


@dataclass
class Cluster:
    id: int
    member_indices: np.ndarray
    centroid: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {"id": self.id, "centroid": list(self.centroid),
                "point_count": int(len(self.member_indices))}


def dbscan(cloud: PointCloud, eps: float = DEFAULT_EPS,
           min_pts: int = DEFAULT_MIN_PTS) -> tuple[list[Cluster], np.ndarray]:
    """Density clustering in 3-D; returns clusters plus noise indices.

    Core points have at least min_pts neighbors (self included) within
    eps. Expansion scans seeds in index order with a FIFO frontier, so
    border points land in the first cluster that reaches them and the
    labeling is deterministic for a fixed point order.
    """
    if eps <= 0 or min_pts < 1:
        raise PerceptionError("eps must be positive and min_pts >= 1")
    pts = np.asarray(cloud.points, dtype=float)
    n = len(pts)
    if n == 0:
        return [], np.array([], dtype=int)

    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighborhoods])

    labels = np.full(n, NOISE, dtype=int)
    cluster_id = 0
    for seed in range(n):
        if labels[seed] != NOISE or not core[seed]:
            continue
        labels[seed] = cluster_id
        frontier = deque([seed])
        while frontier:
            idx = frontier.popleft()
            if not core[idx]:
                continue
            for nb in neighborhoods[idx]:
                if labels[nb] == NOISE:
                    labels[nb] = cluster_id
                    frontier.append(nb)
        cluster_id += 1

    clusters = []
    for cid in range(cluster_id):
        members = np.flatnonzero(labels == cid)
        centroid = pts[members].mean(axis=0)
        clusters.append(Cluster(id=cid, member_indices=members,
                                centroid=tuple(float(c) for c in centroid)))
    noise = np.flatnonzero(labels == NOISE)
    return clusters, noise


def select_target(clusters: list[Cluster],
                  click: tuple[float, float]) -> tuple[tuple[float, float, float], int]:
    """Snap a table-plane click to the nearest cluster centroid.

    Comparison happens in the plane; ties break toward the lowest id.
    """
    if not clusters:
        raise PerceptionError("no clusters to select from")
    cx, cy = click
    best = min(
        clusters,
        key=lambda c: ((c.centroid[0] - cx) ** 2 + (c.centroid[1] - cy) ** 2, c.id),
    )
    return best.centroid, best.id


def plan_grasp_approach(start: tuple[float, float],
                        target: tuple[float, float],
                        speed: float = 0.1, rate: float = 500.0) -> Trajectory:
    """Straight constant-speed segment from the gripper to the target."""
    if not (np.isfinite(start).all() and np.isfinite(target).all()):
        raise PerceptionError("grasp endpoints must be finite")
    return retime_constant_speed(np.array([start, target]), speed=speed, rate=rate)
