"""Observation integration: static intervals, discoveries, and updates.

Every valid depth pixel is voxelized into the geometric layer. Instance
clouds register in the object layer: observations of a known source instance
merge directly; otherwise feature similarity plus voxel overlap decides
merging (constrained children are compared at their propagated pose).

Discovery intervals run two filtered passes over the observations: points on
rays occluded by the part's pre-interaction hull (contains candidates) and
points inside the part's post-interaction hull (constrains candidates). Newly
discovered objects get locked edges, stale geometry overlapping the
pre-interaction hull is pruned, and the part is registered with zero-state
geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..artic.fit import FitResult
from ..artic.fusion import downsample
from ..artic.motion import rigid_motion
from ..errors import GraphQueryError
from ..geom import (
    CameraModel,
    PointCloud,
    backproject,
    convex_hull,
    rays_occluded_by_hull,
)
from .model import ARTICULATED_PART, CONSTRAINS, CONTAINS, STATIC_OBJECT, ObjectNode, SceneGraph


@dataclass(frozen=True)
class IntegrateConfig:
    merge_cos: float = 0.9
    merge_overlap: float = 0.25
    prune_overlap: float = 0.5
    min_instance_points: int = 15
    constrains_tol: float = 0.005
    part_absorb_fraction: float = 0.6
    no_art: bool = False


def _frame_instances(frame, camera: CameraModel):
    """Per-instance world-space point blocks for one frame."""
    cloud = backproject(frame.depth, camera, frame.camera_pose, frame.instance_map)
    if cloud.is_empty:
        return cloud, {}
    blocks = {}
    for inst_id in np.unique(cloud.instance_ids):
        if inst_id == 0:
            continue
        blocks[int(inst_id)] = cloud.points[cloud.instance_ids == inst_id]
    return cloud, blocks


def _cells_of(graph: SceneGraph, points: np.ndarray) -> set:
    from .. import kernels

    if len(points) == 0:
        return set()
    idx = kernels.voxel_indices(points, graph.origin, graph.voxel_size)
    return set(map(tuple, idx.tolist()))


def _child_pose_points(graph: SceneGraph, node: ObjectNode, t: float) -> np.ndarray:
    """Geometry of a locked constrained child propagated to time t."""
    edge = graph.edge_to(node.id)
    if edge is None or edge.kind != CONSTRAINS or not edge.locked:
        return node.geometry.points
    pose = graph.part_pose_at(edge.parent, t)
    return pose.transform(node.geometry.points)


def register_observation(
    graph: SceneGraph,
    points: np.ndarray,
    inst_id: int,
    label: str,
    feature: np.ndarray,
    t: float,
    cfg: IntegrateConfig,
):
    """Merge an instance cloud into the object layer.

    Returns (node, created): `created` is True when a new object node was
    added rather than merged into an existing one.
    """
    known = graph.node_by_instance(inst_id)
    if known is not None:
        if known.kind == ARTICULATED_PART or known.id in graph.constrained_child_ids():
            return known, False  # tracked dynamics; observation absorbed
        merged = np.concatenate([known.geometry.points, points], axis=0)
        known.geometry = PointCloud(downsample(merged, graph.voxel_size / 2.0))
        known.voxel_links |= _cells_of(graph, points)
        return known, False

    new_cells = _cells_of(graph, points)
    best = None
    best_overlap = 0.0
    constrained = graph.constrained_child_ids()
    for node in graph.static_objects():
        cos = float(np.dot(node.feature, feature))
        if cos < cfg.merge_cos:
            continue
        if node.id in constrained:
            cells = _cells_of(graph, _child_pose_points(graph, node, t))
        else:
            cells = node.voxel_links
        if not cells or not new_cells:
            continue
        overlap = len(new_cells & cells) / min(len(new_cells), len(cells))
        if overlap > best_overlap:
            best_overlap = overlap
            best = node
    if best is not None and best_overlap >= cfg.merge_overlap:
        best.source_instances.add(inst_id)
        if best.id in constrained:
            return best, False
        merged = np.concatenate([best.geometry.points, points], axis=0)
        best.geometry = PointCloud(downsample(merged, graph.voxel_size / 2.0))
        best.voxel_links |= new_cells
        return best, False

    node = ObjectNode(
        id=graph.new_id(),
        kind=STATIC_OBJECT,
        label=label,
        geometry=PointCloud(downsample(points, graph.voxel_size / 2.0)),
        feature=np.asarray(feature, float),
        voxel_links=new_cells,
        source_instances={inst_id},
    )
    graph.add_node(node)
    return node, True


def integrate_static(graph, frames, camera, instance_labels, features_by_label, cfg) -> None:
    """Unfiltered integration of one static interval."""
    acc: dict[int, list] = {}
    for frame in frames:
        cloud, blocks = _frame_instances(frame, camera)
        if not cloud.is_empty:
            graph.occupy(cloud.points, cloud.instance_ids)
        for inst_id, pts in blocks.items():
            acc.setdefault(inst_id, []).append(pts)
        graph.last_time = max(graph.last_time, frame.timestamp)
    t_mid = frames[len(frames) // 2].timestamp if frames else graph.last_time
    for inst_id in sorted(acc):
        pts = np.concatenate(acc[inst_id], axis=0)
        if pts.shape[0] < cfg.min_instance_points:
            continue
        label = instance_labels.get(inst_id, f"instance_{inst_id}")
        register_observation(
            graph, pts, inst_id, label, features_by_label[label], t_mid, cfg
        )


def integrate_discovery(
    graph: SceneGraph,
    frames,
    camera: CameraModel,
    estimate: FitResult,
    interval_times,
    data_start_time: float,
    instance_labels,
    features_by_label,
    cfg: IntegrateConfig,
) -> int:
    """Discovery-interval integration; returns the new part node id."""
    joint = estimate.joint
    dtheta = estimate.dtheta
    p_after = estimate.part.points
    p_zero = rigid_motion(p_after, 1.0, joint, dtheta)
    hull_before = convex_hull(PointCloud(p_zero))
    hull_after = convex_hull(PointCloud(p_after))
    after_tree = cKDTree(p_after)

    raw_acc: dict[int, list] = {}
    contains_acc: dict[int, list] = {}
    constr_acc: dict[int, list] = {}
    for frame in frames:
        cloud, blocks = _frame_instances(frame, camera)
        cam_center = frame.camera_pose.translation
        for inst_id, pts in blocks.items():
            raw_acc.setdefault(inst_id, []).append(pts)
            if cfg.no_art:
                contains_acc.setdefault(inst_id, []).append(pts)
                continue
            occl = rays_occluded_by_hull(pts, cam_center, hull_before)
            if occl.any():
                contains_acc.setdefault(inst_id, []).append(pts[occl])
            inside = hull_after.contains(pts, tol=cfg.constrains_tol)
            if inside.any():
                constr_acc.setdefault(inst_id, []).append(pts[inside])
        graph.last_time = max(graph.last_time, frame.timestamp)

    # the dominant instance lying on the moved blob is the part itself;
    # smaller riders inside the blob become constrained children
    part_source = set()
    best_count = 0
    for inst_id, chunks in raw_acc.items():
        pts = np.concatenate(chunks, axis=0)
        near = after_tree.query(pts, k=1)[0] <= 2.0 * graph.voxel_size
        if near.mean() >= cfg.part_absorb_fraction and pts.shape[0] > best_count:
            best_count = pts.shape[0]
            part_source = {inst_id}

    part_label = (
        instance_labels.get(next(iter(part_source)), "part") if part_source else "part"
    )
    part_node = ObjectNode(
        id=graph.new_id(),
        kind=ARTICULATED_PART,
        label=part_label,
        geometry=PointCloud(p_zero),
        joint=joint,
        voxel_links=_cells_of(graph, p_after),
        source_instances=set(part_source),
    )
    graph.add_node(part_node)
    graph.events.extend(part_node.id, data_start_time, 0.0)
    graph.events.extend(part_node.id, interval_times[1], dtheta)

    t_mid = frames[len(frames) // 2].timestamp if frames else graph.last_time
    discovered_here: dict[int, ObjectNode] = {}

    def _register_pass(acc, kind):
        for inst_id in sorted(acc):
            if inst_id in part_source:
                continue
            pts = np.concatenate(acc[inst_id], axis=0)
            if pts.shape[0] < cfg.min_instance_points:
                continue
            label = instance_labels.get(inst_id, f"instance_{inst_id}")
            node, created = register_observation(
                graph, pts, inst_id, label, features_by_label[label], t_mid, cfg
            )
            if created:
                discovered_here[node.id] = node
                graph.add_edge(part_node.id, node.id, kind, locked=True)
            elif kind == CONSTRAINS and node.id in discovered_here:
                # found in the contains pass of this same discovery: the
                # overlap evidence is stronger, upgrade the relationship
                graph.add_edge(part_node.id, node.id, CONSTRAINS, locked=True)
        # voxelize the surviving candidate points
        for inst_id in sorted(acc):
            if inst_id in part_source:
                continue
            pts = np.concatenate(acc[inst_id], axis=0)
            graph.occupy(pts, np.full(pts.shape[0], inst_id, dtype=np.int64))

    _register_pass(contains_acc, CONTAINS)
    if not cfg.no_art:
        _register_pass(constr_acc, CONSTRAINS)

    # constrained children store zero-state geometry so propagation works
    for _, child in graph.children_of(part_node.id, CONSTRAINS):
        child.geometry = PointCloud(
            rigid_motion(child.geometry.points, 1.0, joint, dtheta),
            child.geometry.instance_ids,
        )

    prune_with_hull(graph, hull_before, cfg)
    graph.interaction_windows.append(tuple(interval_times))
    return part_node.id


def integrate_update(
    graph: SceneGraph,
    frames,
    camera: CameraModel,
    part_id: int,
    dtheta_new: float,
    interval_times,
    instance_labels,
    features_by_label,
    cfg: IntegrateConfig,
) -> None:
    """Update-interval integration: extend events, prune stale pose, integrate."""
    if part_id not in graph.nodes or graph.nodes[part_id].kind != ARTICULATED_PART:
        raise GraphQueryError(f"unknown part id {part_id}")
    part = graph.nodes[part_id]
    s_prev = graph.events.state_at(part_id, interval_times[0])
    p_before = rigid_motion(part.geometry.points, -1.0, part.joint, s_prev)
    hull_before = convex_hull(PointCloud(p_before))
    graph.events.extend(part_id, interval_times[1], dtheta_new)
    prune_with_hull(graph, hull_before, cfg)
    integrate_static(graph, frames, camera, instance_labels, features_by_label, cfg)
    graph.interaction_windows.append(tuple(interval_times))


def prune_with_hull(graph: SceneGraph, hull, cfg: IntegrateConfig) -> None:
    """Drop voxels and unlocked static objects overlapping the hull."""
    from .. import kernels

    if graph.cells:
        keys = sorted(graph.cells)
        centers = graph.cell_centers(keys)
        # inflate by the half-diagonal so any cube intersecting the hull goes
        margin = graph.voxel_size * np.sqrt(3.0) / 2.0
        inside = kernels.halfspace_inside(
            centers, hull.normals, hull.offsets + margin, 0.0
        )
        for key, hit in zip(keys, inside):
            if hit:
                del graph.cells[key]

    exempt = graph.constrained_child_ids()
    doomed = []
    for node in graph.static_objects():
        if node.id in exempt or node.geometry.is_empty:
            continue
        frac = float(np.count_nonzero(hull.contains(node.geometry.points))) / len(
            node.geometry
        )
        if frac > cfg.prune_overlap:
            doomed.append(node.id)
    for node_id in doomed:
        graph.remove_node(node_id)
