"""Read-only scene graph queries: propagation, final geometry, retrieval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GraphQueryError
from ..geom import PointCloud
from .model import ARTICULATED_PART, CONSTRAINS, SceneGraph

STANDOFF_DIRECTIONS = 64
STANDOFF_MAX_RANGE = 5.0


def propagate_state(graph: SceneGraph, part_id: int, t: float) -> dict:
    """Clouds of the part and its constrained children at time t.

    Contains-children do not move and are not returned. Raises inside
    interaction intervals, where the articulation state is not modeled.
    """
    if part_id not in graph.nodes or graph.nodes[part_id].kind != ARTICULATED_PART:
        raise GraphQueryError(f"unknown part id {part_id}")
    if graph.in_interaction(t):
        raise GraphQueryError(f"t={t} falls inside an interaction interval")
    pose = graph.part_pose_at(part_id, t)
    out = {part_id: graph.nodes[part_id].geometry.transformed(pose)}
    for edge, child in graph.children_of(part_id, CONSTRAINS):
        if edge.locked:
            out[child.id] = child.geometry.transformed(pose)
    return out


def finalize_geometry(graph: SceneGraph, t: float) -> PointCloud:
    """Static voxel centers plus all dynamic clouds propagated to time t."""
    if graph.in_interaction(t):
        raise GraphQueryError(f"t={t} falls inside an interaction interval")
    clouds = [PointCloud(graph.cell_centers())] if graph.cells else []
    for part in sorted(graph.parts(), key=lambda n: n.id):
        clouds.extend(
            cloud
            for _, cloud in sorted(propagate_state(graph, part.id, t).items())
        )
    if not clouds:
        return PointCloud(np.zeros((0, 3)))
    return PointCloud.concatenate(clouds)


@dataclass(frozen=True)
class RetrievalPlan:
    target_id: int
    target_label: str
    target_point: np.ndarray
    parent_id: int | None
    parent_label: str | None
    joint_kind: str | None
    joint_axis: np.ndarray | None
    joint_pivot: np.ndarray | None
    joint_state: float | None
    relation: str | None
    handle_point: np.ndarray | None
    handle_axis: np.ndarray | None
    standoff: np.ndarray

    def to_dict(self) -> dict:
        def arr(v):
            return None if v is None else [float(x) for x in v]

        return {
            "target_id": self.target_id,
            "target_label": self.target_label,
            "target_point": arr(self.target_point),
            "parent_id": self.parent_id,
            "parent_label": self.parent_label,
            "joint": None
            if self.joint_kind is None
            else {
                "kind": self.joint_kind,
                "axis": arr(self.joint_axis),
                "pivot": arr(self.joint_pivot),
                "state": self.joint_state,
            },
            "relation": self.relation,
            "handle_point": arr(self.handle_point),
            "handle_axis": arr(self.handle_axis),
            "standoff": arr(self.standoff),
        }


def _hemisphere_directions(n: int = STANDOFF_DIRECTIONS) -> np.ndarray:
    """Deterministic Fibonacci sampling of the upper hemisphere."""
    k = np.arange(n)
    z = (k + 0.5) / n
    r = np.sqrt(1.0 - z * z)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = k * golden
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def free_path_length(
    graph: SceneGraph, origin: np.ndarray, direction: np.ndarray,
    skip_cells: set, max_range: float = STANDOFF_MAX_RANGE,
) -> float:
    """Distance marched through the voxel grid before hitting occupancy."""
    step = graph.voxel_size / 2.0
    ts = np.arange(step, max_range, step)
    pts = origin[None, :] + ts[:, None] * direction[None, :]
    from .. import kernels

    idx = kernels.voxel_indices(pts, graph.origin, graph.voxel_size)
    for t, key in zip(ts, map(tuple, idx.tolist())):
        if key in skip_cells:
            continue
        if key in graph.cells:
            return float(t)
    return float(max_range)


def _standoff_direction(graph: SceneGraph, origin: np.ndarray, skip_cells: set) -> np.ndarray:
    dirs = _hemisphere_directions()
    lengths = np.array(
        [free_path_length(graph, origin, d, skip_cells) for d in dirs]
    )
    best_len = lengths.max()
    tied = np.flatnonzero(lengths >= best_len - 1e-9)
    # break ties toward the most horizontal approach
    best = tied[np.argmin(np.abs(dirs[tied, 2]))]
    return dirs[best]


def query_retrieval(
    graph: SceneGraph,
    label: str | None = None,
    feature=None,
    features_by_label: dict | None = None,
    t: float | None = None,
) -> RetrievalPlan:
    """Plan retrieval of the object whose feature is closest to the query.

    Provide either a feature vector or a label plus the dataset's
    label-to-feature table.
    """
    statics = graph.static_objects()
    if not statics:
        raise GraphQueryError("scene graph has no static objects to query")
    if feature is None:
        if label is None or features_by_label is None:
            raise GraphQueryError("need a feature, or a label with a feature table")
        if label not in features_by_label:
            known = ", ".join(sorted(features_by_label))
            raise GraphQueryError(f"unknown label {label!r}; known labels: {known}")
        feature = features_by_label[label]
    feature = np.asarray(feature, dtype=np.float64)
    feature = feature / np.linalg.norm(feature)

    best = max(
        sorted(statics, key=lambda n: n.id),
        key=lambda n: float(np.dot(n.feature, feature)),
    )
    t_query = graph.last_time if t is None else t
    edge = graph.edge_to(best.id)

    if edge is not None and edge.kind == CONSTRAINS and edge.locked:
        target_cloud = propagate_state(graph, edge.parent, t_query)[best.id]
    else:
        target_cloud = best.geometry
    target_point = target_cloud.centroid()

    parent_id = parent_label = None
    joint_kind = joint_axis = joint_pivot = joint_state = relation = None
    handle_point = handle_axis = None
    if edge is not None:
        parent = graph.nodes[edge.parent]
        parent_id = parent.id
        parent_label = parent.label
        relation = edge.kind
        joint_kind = parent.joint.kind
        joint_axis = parent.joint.axis.copy()
        joint_pivot = None if parent.joint.pivot is None else parent.joint.pivot.copy()
        joint_state = graph.events.state_at(parent.id, t_query)
        handle = _find_handle(graph, parent.id)
        if handle is not None:
            cloud = propagate_state(graph, parent.id, t_query)[handle.id]
            handle_point = cloud.centroid()
            handle_axis = _principal_axis(cloud.points)

    skip = set(best.voxel_links)
    standoff = _standoff_direction(graph, target_point, skip)
    return RetrievalPlan(
        target_id=best.id,
        target_label=best.label,
        target_point=target_point,
        parent_id=parent_id,
        parent_label=parent_label,
        joint_kind=joint_kind,
        joint_axis=joint_axis,
        joint_pivot=joint_pivot,
        joint_state=joint_state,
        relation=relation,
        handle_point=handle_point,
        handle_axis=handle_axis,
        standoff=standoff,
    )


def _find_handle(graph: SceneGraph, part_id: int):
    for _, child in graph.children_of(part_id, CONSTRAINS):
        if "handle" in child.label.lower():
            return child
    return None


def _principal_axis(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    # canonical sign: largest-magnitude component positive
    k = int(np.argmax(np.abs(axis)))
    return axis if axis[k] >= 0 else -axis
