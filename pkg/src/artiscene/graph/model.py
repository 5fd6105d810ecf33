"""Scene graph containers.

The graph is a single-writer state machine: integration calls mutate it in
interval order, queries are read-only. Articulated parts and their constrained
children store zero-state geometry; their pose at time t follows from the
event map. Contains-children and plain static objects never move.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from ..artic.motion import JointModel, joint_transform
from ..errors import GraphQueryError
from ..geom import PointCloud

ARTICULATED_PART = "articulated_part"
STATIC_OBJECT = "static_object"

CONTAINS = "contains"
CONSTRAINS = "constrains"


@dataclass
class ObjectNode:
    id: int
    kind: str
    label: str
    geometry: PointCloud
    feature: np.ndarray | None = None
    joint: JointModel | None = None
    voxel_links: set = field(default_factory=set)
    source_instances: set = field(default_factory=set)

    def __post_init__(self):
        if self.kind == STATIC_OBJECT and self.feature is None:
            raise ValueError("static objects carry a feature vector")
        if self.kind == ARTICULATED_PART and self.joint is None:
            raise ValueError("articulated parts carry a joint model")
        if self.kind == ARTICULATED_PART and self.feature is not None:
            raise ValueError("articulated parts carry no feature")


@dataclass(frozen=True)
class RelationEdge:
    parent: int
    child: int
    kind: str
    locked: bool = False


class EventMap:
    """Piecewise-constant articulation state per part over time."""

    def __init__(self):
        self._events: dict[int, list] = {}

    def extend(self, part_id: int, t: float, state: float) -> None:
        timeline = self._events.setdefault(part_id, [])
        if timeline and t < timeline[-1][0]:
            raise ValueError("event timestamps must be non-decreasing")
        timeline.append((float(t), float(state)))

    def state_at(self, part_id: int, t: float) -> float:
        timeline = self._events.get(part_id)
        if not timeline:
            raise GraphQueryError(f"no events recorded for part {part_id}")
        times = [e[0] for e in timeline]
        k = bisect_right(times, t) - 1
        if k < 0:
            return 0.0
        return timeline[k][1]

    def timeline(self, part_id: int) -> list:
        return list(self._events.get(part_id, []))

    def parts(self):
        return sorted(self._events)

    def items(self):
        return {pid: list(tl) for pid, tl in self._events.items()}


class SceneGraph:
    def __init__(self, voxel_size: float = 0.02, origin=(0.0, 0.0, 0.0)):
        if voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        self.voxel_size = float(voxel_size)
        self.origin = np.asarray(origin, dtype=np.float64)
        self.cells: dict[tuple, set] = {}
        self.nodes: dict[int, ObjectNode] = {}
        self.edges: list[RelationEdge] = []
        self.events = EventMap()
        self.interaction_windows: list[tuple] = []
        self.last_time: float = 0.0
        self._next_id = 1

    # -- bookkeeping -------------------------------------------------------
    def new_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def add_node(self, node: ObjectNode) -> ObjectNode:
        self.nodes[node.id] = node
        return node

    def add_edge(self, parent: int, child: int, kind: str, locked: bool = False) -> None:
        self.edges = [e for e in self.edges if not (e.parent == parent and e.child == child)]
        self.edges.append(RelationEdge(parent, child, kind, locked))

    def remove_node(self, node_id: int) -> None:
        self.nodes.pop(node_id, None)
        self.edges = [e for e in self.edges if e.child != node_id and e.parent != node_id]

    # -- lookups -----------------------------------------------------------
    def parts(self) -> list:
        return [n for n in self.nodes.values() if n.kind == ARTICULATED_PART]

    def static_objects(self) -> list:
        return [n for n in self.nodes.values() if n.kind == STATIC_OBJECT]

    def edge_to(self, child_id: int) -> RelationEdge | None:
        for e in self.edges:
            if e.child == child_id:
                return e
        return None

    def children_of(self, part_id: int, kind: str | None = None) -> list:
        out = []
        for e in self.edges:
            if e.parent == part_id and (kind is None or e.kind == kind):
                out.append((e, self.nodes[e.child]))
        return out

    def constrained_child_ids(self) -> set:
        return {e.child for e in self.edges if e.kind == CONSTRAINS and e.locked}

    def node_by_instance(self, inst_id: int) -> ObjectNode | None:
        for node in self.nodes.values():
            if inst_id in node.source_instances:
                return node
        return None

    def in_interaction(self, t: float) -> bool:
        return any(t0 < t < t1 for t0, t1 in self.interaction_windows)

    # -- geometry ----------------------------------------------------------
    def part_pose_at(self, part_id: int, t: float):
        node = self.nodes[part_id]
        return joint_transform(node.joint, self.events.state_at(part_id, t))

    def occupy(self, points: np.ndarray, instance_ids=None) -> set:
        """Mark cells occupied; returns the touched cell set."""
        from .. import kernels

        if len(points) == 0:
            return set()
        idx = kernels.voxel_indices(points, self.origin, self.voxel_size)
        touched = set()
        for row, key in enumerate(map(tuple, idx.tolist())):
            cell = self.cells.setdefault(key, set())
            if instance_ids is not None:
                cell.add(int(instance_ids[row]))
            touched.add(key)
        return touched

    def cell_centers(self, keys=None) -> np.ndarray:
        keys = sorted(self.cells if keys is None else keys)
        if not keys:
            return np.zeros((0, 3))
        return self.origin + (np.asarray(keys, dtype=np.float64) + 0.5) * self.voxel_size
