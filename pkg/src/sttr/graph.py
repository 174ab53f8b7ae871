"""Skeleton graph: adjacency normalization, spatial partitioning, parent map.

The joint graph is normalized as D^{-1/2} (A + I) D^{-1/2} and split into
three partitions by comparing each pair's hop distance to the center joint:
equal distance (root, includes self-loops), closer (centripetal), farther
(centrifugal). One partition matrix per set; they sum to the normalized
adjacency exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# NTU RGB+D 25-joint bone links, 0-based (joint labels follow the Kinect v2
# skeleton; pairs are (child, parent-ward neighbor) in 1-based NTU convention).
NTU_EDGES: list[tuple[int, int]] = [(j - 1, k - 1) for j, k in [
    (1, 2), (2, 21), (3, 21), (4, 3), (5, 21), (6, 5), (7, 6), (8, 7),
    (9, 21), (10, 9), (11, 10), (12, 11), (13, 1), (14, 13), (15, 14),
    (16, 15), (17, 1), (18, 17), (19, 18), (20, 19), (22, 23), (23, 8),
    (24, 25), (25, 12),
]]
NTU_NUM_JOINTS = 25
# "middle of the spine", NTU joint 2 (1-based)
NTU_CENTER_JOINT = 1

PARTITION_NAMES = ("root", "centripetal", "centrifugal")


class GraphError(ValueError):
    pass


@dataclass
class SkeletonGraph:
    num_joints: int
    edges: list[tuple[int, int]]
    center_joint: int
    A_norm: np.ndarray  # (3, V, V): root, centripetal, centrifugal
    parents: np.ndarray = field(default=None)  # parent joint per joint; center is its own

    @property
    def full_normalized(self) -> np.ndarray:
        return self.A_norm.sum(axis=0)


def _hop_distances(num_joints: int, adj: np.ndarray, source: int) -> np.ndarray:
    dist = np.full(num_joints, np.inf)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in np.nonzero(adj[u])[0]:
                if dist[v] == np.inf:
                    dist[v] = d
                    nxt.append(int(v))
        frontier = nxt
    return dist


def normalize_adjacency(edges: list[tuple[int, int]], num_joints: int,
                        center_joint: int = 0) -> SkeletonGraph:
    """Build the partitioned normalized adjacency for a joint graph."""
    adj = np.zeros((num_joints, num_joints))
    for a, b in edges:
        if not (0 <= a < num_joints and 0 <= b < num_joints):
            raise GraphError(f"edge ({a}, {b}) references a joint >= {num_joints}")
        adj[a, b] = adj[b, a] = 1.0
    if not 0 <= center_joint < num_joints:
        raise GraphError(f"center joint {center_joint} out of range")

    with_self = adj + np.eye(num_joints)
    deg = with_self.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    normalized = with_self * inv_sqrt[:, None] * inv_sqrt[None, :]

    dist = _hop_distances(num_joints, adj, center_joint)
    parts = np.zeros((3, num_joints, num_joints))
    for i in range(num_joints):
        for j in range(num_joints):
            if normalized[i, j] == 0:
                continue
            if i == j or dist[j] == dist[i]:
                parts[0, i, j] = normalized[i, j]
            elif dist[j] < dist[i]:
                parts[1, i, j] = normalized[i, j]
            else:
                parts[2, i, j] = normalized[i, j]

    parents = np.arange(num_joints)
    order = np.argsort(np.where(np.isinf(dist), num_joints + 1, dist))
    for j in order:
        if j == center_joint or np.isinf(dist[j]):
            continue
        neighbors = np.nonzero(adj[j])[0]
        ups = [int(n) for n in neighbors if dist[n] < dist[j]]
        parents[j] = min(ups) if ups else center_joint

    return SkeletonGraph(num_joints=num_joints, edges=list(edges),
                         center_joint=center_joint, A_norm=parts, parents=parents)


def ntu_graph() -> SkeletonGraph:
    return normalize_adjacency(NTU_EDGES, NTU_NUM_JOINTS, NTU_CENTER_JOINT)
