"""
Skeleton Graph
==============

Body topology, its parent map and the three-way partitioned adjacency.

Partitions (spatial configuration strategy):
    0  self loops (identity)
    1  centripetal neighbours: the neighbour is closer to the center joint
    2  centrifugal neighbours: the neighbour is farther from the center joint

Each partition is row-normalized (D_k^-1 A_k); all-zero rows stay zero.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from common.exceptions import TopologyError

NUM_PARTITIONS = 3

# NTU RGB+D 25-joint skeleton, 1-based joint numbers as published with the dataset
NTU25_EDGES_1BASED: tuple[tuple[int, int], ...] = (
    (1, 2), (2, 21), (3, 21), (4, 3), (5, 21), (6, 5), (7, 6), (8, 7),
    (9, 21), (10, 9), (11, 10), (12, 11), (13, 1), (14, 13), (15, 14), (16, 15),
    (17, 1), (18, 17), (19, 18), (20, 19), (22, 23), (23, 8), (24, 25), (25, 12),
)  # fmt: skip
NTU25_CENTER = 20  # spine shoulder (joint 21)

# Limb roots for the synthetic generator, 0-based
NTU25_LIMB_ROOTS: dict[str, int] = {
    "left_arm": 4,  # left shoulder
    "right_arm": 8,  # right shoulder
    "left_leg": 12,  # left hip
    "right_leg": 16,  # right hip
}


@dataclass(frozen=True)
class SkeletonGraph:
    """Connected tree over V joints with a designated center.

    Attributes:
        num_joints: V
        edges: undirected 0-based joint pairs
        center: root joint index
        parent: parent[j] is the next joint on the path to the center (center maps to itself)
        depth: hop distance of every joint from the center
    """

    num_joints: int
    edges: tuple[tuple[int, int], ...]
    center: int
    parent: tuple[int, ...] = field(init=False)
    depth: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        """Validate the tree and derive parent/depth by BFS from the center.

        Raises:
            TopologyError: If the center or an edge is out of range, an edge is a
                self loop or duplicate, or the edges do not form a connected tree.
        """
        v = self.num_joints
        if v < 1:
            raise TopologyError(f"graph needs at least one joint, got V={v}")
        if not 0 <= self.center < v:
            raise TopologyError(f"center {self.center} is outside [0, {v})")
        neighbours: list[list[int]] = [[] for _ in range(v)]
        seen: set[frozenset[int]] = set()
        for i, j in self.edges:
            if not (0 <= i < v and 0 <= j < v):
                raise TopologyError(f"edge ({i}, {j}) is outside [0, {v})")
            if i == j:
                raise TopologyError(f"self-loop edge ({i}, {j}) is not allowed")
            key = frozenset((i, j))
            if key in seen:
                raise TopologyError(f"duplicate edge ({i}, {j})")
            seen.add(key)
            neighbours[i].append(j)
            neighbours[j].append(i)
        if len(seen) != v - 1:
            raise TopologyError(f"a tree over {v} joints has {v - 1} edges, got {len(seen)}")

        parent = [-1] * v
        depth = [-1] * v
        parent[self.center] = self.center
        depth[self.center] = 0
        queue = deque([self.center])
        while queue:
            joint = queue.popleft()
            for nxt in sorted(neighbours[joint]):
                if depth[nxt] < 0:
                    depth[nxt] = depth[joint] + 1
                    parent[nxt] = joint
                    queue.append(nxt)
        unreachable = [j for j in range(v) if depth[j] < 0]
        if unreachable:
            raise TopologyError(f"graph is disconnected: joints {unreachable} cannot reach center {self.center}")
        object.__setattr__(self, "parent", tuple(parent))
        object.__setattr__(self, "depth", tuple(depth))

    def path_to_center(self, joint: int) -> list[int]:
        """Joints from `joint` up to and including the center."""
        path = [joint]
        while path[-1] != self.center:
            path.append(self.parent[path[-1]])
        return path

    def descendants(self, joint: int) -> list[int]:
        """Joints whose path to the center passes through `joint` (excluding it)."""
        return [j for j in range(self.num_joints) if j != joint and joint in self.path_to_center(j)]

    def adjacency(self) -> np.ndarray:
        """Symmetric 0/1 edge adjacency without self loops."""
        a = np.zeros((self.num_joints, self.num_joints), dtype=np.float64)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def permuted(self, perm: np.ndarray) -> SkeletonGraph:
        """Relabel joints: new joint k is old joint perm[k]."""
        position = np.argsort(perm)
        edges = tuple((int(position[i]), int(position[j])) for i, j in self.edges)
        return SkeletonGraph(self.num_joints, edges, int(position[self.center]))

    def to_dict(self) -> dict[str, Any]:
        return {"V": self.num_joints, "edges": [list(e) for e in self.edges], "center": self.center}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SkeletonGraph:
        """Create from {"V": int, "edges": [[i, j], ...], "center": int} with 0-based joints.

        Raises:
            TopologyError: If keys are missing or the graph is not a connected tree.
        """
        try:
            edges = tuple((int(i), int(j)) for i, j in data["edges"])
            return cls(int(data["V"]), edges, int(data["center"]))
        except (KeyError, TypeError, ValueError) as e:
            raise TopologyError(f"invalid graph definition: {e}") from e


def ntu25_graph() -> SkeletonGraph:
    edges = tuple((i - 1, j - 1) for i, j in NTU25_EDGES_1BASED)
    return SkeletonGraph(25, edges, NTU25_CENTER)


def load_graph(source: str | Path) -> SkeletonGraph:
    """Resolve "ntu25" to the built-in graph; anything else is a graph JSON file.

    Raises:
        TopologyError: If the file cannot be read or does not define a connected tree.
    """
    if str(source) == "ntu25":
        return ntu25_graph()
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise TopologyError(f"cannot read graph definition {path}: {e}") from e
    return SkeletonGraph.from_dict(data)


def partition_masks(graph: SkeletonGraph) -> np.ndarray:
    """Unnormalized 0/1 partitions [3, V, V]; their sum is I + adjacency."""
    v = graph.num_joints
    masks = np.zeros((NUM_PARTITIONS, v, v), dtype=np.float64)
    masks[0] = np.eye(v)
    for i, j in graph.edges:
        for a, b in ((i, j), (j, i)):
            masks[1 if graph.depth[b] < graph.depth[a] else 2, a, b] = 1.0
    return masks


def row_normalize(matrix: np.ndarray) -> np.ndarray:
    degree = matrix.sum(axis=-1, keepdims=True)
    return np.divide(matrix, degree, out=np.zeros_like(matrix), where=degree > 0)


def build_partitions(graph: SkeletonGraph) -> np.ndarray:
    """Row-normalized partitions [3, V, V] (self, centripetal, centrifugal) in float64."""
    return row_normalize(partition_masks(graph))
