"""Scene-graph JSON export/import.

Schema:

    {
      "voxel_grid": {"origin": [x,y,z], "size": s, "occupied": [[i,j,k], ...]},
      "objects": [{"id", "kind", "label", "feature", "joint": {"kind","axis","pivot"},
                   "points_ref"}, ...],
      "edges": [{"parent", "child", "kind", "locked"}, ...],
      "events": {"<part_id>": [[t, dtheta], ...], ...},
      "intervals": {"interactions": [[t0,t1], ...]},
      "features_by_label": {...},
      "meta": {"last_time": t}
    }

Point clouds live in little-endian float32 files referenced by `points_ref`,
relative to the JSON file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..artic.motion import JointModel
from ..geom import PointCloud
from .model import ARTICULATED_PART, ObjectNode, SceneGraph


def export_graph(graph: SceneGraph, path, features_by_label: dict | None = None) -> None:
    path = Path(path)
    points_dir = path.parent / "points"
    points_dir.mkdir(parents=True, exist_ok=True)

    objects = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        ref = f"points/obj_{node_id:06d}.bin"
        node.geometry.points.astype("<f4").tofile(path.parent / ref)
        joint = None
        if node.joint is not None:
            joint = {
                "kind": node.joint.kind,
                "axis": [float(v) for v in node.joint.axis],
                "pivot": None
                if node.joint.pivot is None
                else [float(v) for v in node.joint.pivot],
            }
        objects.append(
            {
                "id": node.id,
                "kind": node.kind,
                "label": node.label,
                "feature": None
                if node.feature is None
                else [float(v) for v in node.feature],
                "joint": joint,
                "points_ref": ref,
            }
        )

    doc = {
        "voxel_grid": {
            "origin": [float(v) for v in graph.origin],
            "size": graph.voxel_size,
            "occupied": [list(k) for k in sorted(graph.cells)],
        },
        "objects": objects,
        "edges": [
            {"parent": e.parent, "child": e.child, "kind": e.kind, "locked": e.locked}
            for e in sorted(graph.edges, key=lambda e: (e.parent, e.child))
        ],
        "events": {
            str(pid): [[float(t), float(s)] for t, s in graph.events.timeline(pid)]
            for pid in graph.events.parts()
        },
        "intervals": {
            "interactions": [[float(a), float(b)] for a, b in graph.interaction_windows]
        },
        "features_by_label": {
            k: [float(v) for v in vec]
            for k, vec in sorted((features_by_label or {}).items())
        },
        "meta": {"last_time": float(graph.last_time)},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def import_graph(path):
    """Rebuild a SceneGraph (plus the feature table) from an exported JSON."""
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    grid = doc["voxel_grid"]
    graph = SceneGraph(voxel_size=float(grid["size"]), origin=np.asarray(grid["origin"]))
    for key in grid["occupied"]:
        graph.cells[tuple(int(v) for v in key)] = set()
    max_id = 0
    for obj in doc["objects"]:
        pts = np.fromfile(path.parent / obj["points_ref"], dtype="<f4").reshape(-1, 3)
        joint = None
        if obj["joint"] is not None:
            joint = JointModel(
                obj["joint"]["kind"],
                np.asarray(obj["joint"]["axis"], float),
                obj["joint"]["pivot"],
            )
        feature = None if obj["feature"] is None else np.asarray(obj["feature"], float)
        node = ObjectNode(
            id=int(obj["id"]),
            kind=obj["kind"],
            label=obj["label"],
            geometry=PointCloud(pts.astype(np.float64)),
            feature=feature,
            joint=joint,
        )
        node.voxel_links = set()
        if node.kind != ARTICULATED_PART:
            node.voxel_links = _links_of(graph, node.geometry.points)
        graph.add_node(node)
        max_id = max(max_id, node.id)
    graph._next_id = max_id + 1
    for e in doc["edges"]:
        graph.add_edge(int(e["parent"]), int(e["child"]), e["kind"], bool(e["locked"]))
    for pid, timeline in doc["events"].items():
        for t, s in timeline:
            graph.events.extend(int(pid), float(t), float(s))
    graph.interaction_windows = [tuple(w) for w in doc["intervals"]["interactions"]]
    graph.last_time = float(doc["meta"]["last_time"])
    features = {
        k: np.asarray(v, float) for k, v in doc.get("features_by_label", {}).items()
    }
    return graph, features


def _links_of(graph: SceneGraph, points: np.ndarray) -> set:
    from .. import kernels

    if len(points) == 0:
        return set()
    idx = kernels.voxel_indices(points, graph.origin, graph.voxel_size)
    return set(map(tuple, idx.tolist()))
