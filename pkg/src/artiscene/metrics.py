"""Quantitative metrics: joint errors and scene-graph precision/recall/F1.

Joint errors follow the wrapped-angle / normalized-pivot definitions; scene
metrics match predictions to ground truth one-to-one (maximum bipartite
matching) under label equality plus a geometric criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .artic.motion import joint_transform
from .graph.model import ARTICULATED_PART, CONSTRAINS, CONTAINS, SceneGraph
from .graph.query import propagate_state

DYNAMIC_DELTA = 0.10
MESH_DELTA = 0.20


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matched: int, n_pred: int, n_gt: int) -> "PRF":
        p = matched / n_pred if n_pred else 0.0
        r = matched / n_gt if n_gt else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)

    def as_tuple(self):
        return (self.precision, self.recall, self.f1)


def wrap_angle(theta: float) -> float:
    return min(theta, np.pi - theta)


def axis_error(u_star, u_hat, kind_star: str, kind_hat: str) -> float:
    """Wrapped angle between axes; pi/2 on joint-type mismatch. Radians."""
    u_star = np.asarray(u_star, float)
    u_hat = np.asarray(u_hat, float)
    for u in (u_star, u_hat):
        if abs(np.linalg.norm(u) - 1.0) > 1e-6:
            raise ValueError("axes must be unit vectors")
    if kind_star != kind_hat:
        return np.pi / 2.0
    dot = float(np.clip(np.dot(u_star, u_hat), -1.0, 1.0))
    return wrap_angle(float(np.arccos(dot)))


def pivot_error(u_star, x_star, x_hat, d: float, kind_star: str, kind_hat: str) -> float:
    """Axis-orthogonal pivot distance normalized by `d`; 1 on type mismatch."""
    if d <= 0:
        raise ValueError("normalization length d must be positive")
    u_star = np.asarray(u_star, float)
    if abs(np.linalg.norm(u_star) - 1.0) > 1e-6:
        raise ValueError("axes must be unit vectors")
    if kind_star != kind_hat:
        return 1.0
    diff = np.asarray(x_star, float) - np.asarray(x_hat, float)
    return float(np.linalg.norm(np.cross(diff, u_star)) / d)


def mesh_recovery(estimated, truth, delta: float = MESH_DELTA) -> PRF:
    """Symmetric point-coverage PRF at tolerance `delta`."""
    est = np.asarray(estimated, float)
    tru = np.asarray(truth, float)
    if est.shape[0] == 0 or tru.shape[0] == 0:
        raise ValueError("mesh recovery needs non-empty clouds")
    d_et = cKDTree(tru).query(est, k=1)[0]
    d_te = cKDTree(est).query(tru, k=1)[0]
    precision = float(np.mean(d_et <= delta))
    recall = float(np.mean(d_te <= delta))
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return PRF(precision, recall, f1)


def matched_prf(pred, gt, compatible) -> PRF:
    """Maximum one-to-one matching PRF under a compatibility predicate."""
    n_pred, n_gt = len(pred), len(gt)
    if n_pred == 0 or n_gt == 0:
        return PRF.from_counts(0, n_pred, n_gt)
    weight = np.zeros((n_pred, n_gt))
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            if compatible(p, g):
                weight[i, j] = 1.0
    rows, cols = linear_sum_assignment(weight, maximize=True)
    matched = int(weight[rows, cols].sum())
    return PRF.from_counts(matched, n_pred, n_gt)


# -- graph-level suites -----------------------------------------------------

def _aabb(points: np.ndarray):
    return points.min(axis=0), points.max(axis=0)


def _aabb_iou(lo_a, hi_a, lo_b, hi_b) -> float:
    inter = np.maximum(0.0, np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b))
    vol_i = float(np.prod(inter))
    vol_a = float(np.prod(np.maximum(hi_a - lo_a, 0.0)))
    vol_b = float(np.prod(np.maximum(hi_b - lo_b, 0.0)))
    denom = vol_a + vol_b - vol_i
    return vol_i / denom if denom > 0 else 0.0


def _gt_static_objects(gt) -> list:
    """Non-background statics plus contains-items (they never move)."""
    out = []
    for sid, st in gt.statics.items():
        if not st["background"]:
            out.append({"label": st["label"], "lo": st["box"][0], "hi": st["box"][1]})
    for iid, it in gt.items.items():
        if it["relation"] == CONTAINS:
            out.append({"label": it["label"], "lo": it["box"][0], "hi": it["box"][1]})
    return out


def _background_labels(gt) -> set:
    return {st["label"] for st in gt.statics.values() if st["background"]}


def static_object_metrics(graph: SceneGraph, gt, iou_threshold: float = 0.0) -> PRF:
    """Static-object detection: AABB overlap plus instance-label equality."""
    constrained = graph.constrained_child_ids()
    bg = _background_labels(gt)
    pred = []
    for node in graph.static_objects():
        if node.id in constrained or node.label in bg or node.geometry.is_empty:
            continue
        lo, hi = _aabb(node.geometry.points)
        pred.append({"label": node.label, "lo": lo, "hi": hi})
    gt_objs = _gt_static_objects(gt)

    def compatible(p, g):
        if p["label"] != g["label"]:
            return False
        return _aabb_iou(p["lo"], p["hi"], g["lo"], g["hi"]) > iou_threshold

    return matched_prf(pred, gt_objs, compatible)


def _static_midpoints(graph: SceneGraph) -> list:
    """Midpoints of the static intervals implied by the interaction windows."""
    bounds = [0.0]
    for t0, t1 in sorted(graph.interaction_windows):
        bounds.extend([t0, t1])
    bounds.append(graph.last_time)
    mids = []
    for a, b in zip(bounds[::2], bounds[1::2]):
        if b > a:
            mids.append((a + b) / 2.0)
    return mids


def _gt_dynamic_at(gt, t: float) -> list:
    """Constrained items whose parent part has moved by time t."""
    out = []
    for iid, it in gt.items.items():
        if it["relation"] != CONSTRAINS:
            continue
        pid = it["parent"]
        k = int(np.searchsorted(gt.timestamps, t + 1e-9))
        moved = np.any(np.abs(gt.states[pid][:k]) > 1e-9)
        if not moved:
            continue
        state = gt.state_at(pid, t)
        joint = gt.joints[pid]
        from .artic.motion import JointModel

        jm = JointModel(joint["kind"], joint["axis"], joint["pivot"])
        center = 0.5 * (it["box"][0] + it["box"][1])
        out.append(
            {
                "label": it["label"],
                "centroid": joint_transform(jm, state).transform(center[None, :])[0],
            }
        )
    return out


def dynamic_object_metrics(graph: SceneGraph, gt, delta: float = DYNAMIC_DELTA) -> PRF:
    """Per-keyframe centroid tracking of constrained objects, averaged."""
    keyframes = _static_midpoints(graph)
    per_kf = []
    for t in keyframes:
        pred = []
        for part in graph.parts():
            clouds = propagate_state(graph, part.id, t)
            for edge, child in graph.children_of(part.id, CONSTRAINS):
                if edge.locked:
                    pred.append(
                        {"label": child.label, "centroid": clouds[child.id].centroid()}
                    )
        gt_dyn = _gt_dynamic_at(gt, t)
        if not pred and not gt_dyn:
            continue

        def compatible(p, g):
            if p["label"] != g["label"]:
                return False
            return float(np.linalg.norm(p["centroid"] - g["centroid"])) <= delta

        per_kf.append(matched_prf(pred, gt_dyn, compatible))
    if not per_kf:
        return PRF(0.0, 0.0, 0.0)
    p = float(np.mean([m.precision for m in per_kf]))
    r = float(np.mean([m.recall for m in per_kf]))
    f = float(np.mean([m.f1 for m in per_kf]))
    return PRF(p, r, f)


def relationship_metrics(graph: SceneGraph, gt) -> PRF:
    """Edges matched by (parent label, child label, relation kind)."""
    pred = [
        {
            "parent": graph.nodes[e.parent].label,
            "child": graph.nodes[e.child].label,
            "kind": e.kind,
        }
        for e in graph.edges
        if e.parent in graph.nodes and e.child in graph.nodes
    ]
    gt_rel = [
        {
            "parent": gt.joints[r["parent"]]["label"],
            "child": r["child_label"],
            "kind": r["kind"],
        }
        for r in gt.relationships
    ]

    def compatible(p, g):
        return p == g

    return matched_prf(pred, gt_rel, compatible)


def mesh_recovery_metrics(graph: SceneGraph, gt, delta: float = MESH_DELTA) -> PRF:
    from .graph.query import finalize_geometry

    t = graph.last_time
    if graph.in_interaction(t):
        t = max(b for _, b in graph.interaction_windows)
    cloud = finalize_geometry(graph, t)
    if cloud.is_empty:
        return PRF(0.0, 0.0, 0.0)
    return mesh_recovery(cloud.points, gt.mesh_points, delta)


def joint_metrics(graph: SceneGraph, gt) -> list:
    """Per-GT-part axis/pivot errors against the best-matching estimated part."""
    rows = []
    est_parts = graph.parts()
    for pid, joint in gt.joints.items():
        lo, hi = joint["box"]
        diag = float(np.linalg.norm(hi - lo))
        gt_center = 0.5 * (lo + hi)
        best = None
        best_d = np.inf
        for node in est_parts:
            d = float(np.linalg.norm(node.geometry.centroid() - gt_center))
            if d < best_d:
                best_d = d
                best = node
        row = {"part": pid, "label": joint["label"], "matched": best is not None}
        if best is None:
            row.update({"axis_error": np.pi / 2, "pivot_error": 1.0, "kind": None})
        else:
            row["kind"] = best.joint.kind
            row["axis_error"] = axis_error(
                joint["axis"], best.joint.axis, joint["kind"], best.joint.kind
            )
            if joint["kind"] == "revolute":
                x_hat = best.joint.pivot if best.joint.pivot is not None else np.zeros(3)
                row["pivot_error"] = pivot_error(
                    joint["axis"], joint["pivot"], x_hat, diag,
                    joint["kind"], best.joint.kind,
                )
        rows.append(row)
    return rows


def evaluate_graph(graph: SceneGraph, gt) -> dict:
    """Full metric suite in report form."""
    report = {
        "mesh_recovery": mesh_recovery_metrics(graph, gt).as_tuple(),
        "static_objects": static_object_metrics(graph, gt).as_tuple(),
        "dynamic_objects": dynamic_object_metrics(graph, gt).as_tuple(),
        "relationships": relationship_metrics(graph, gt).as_tuple(),
        "joints": joint_metrics(graph, gt),
    }
    return report
