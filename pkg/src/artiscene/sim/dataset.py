"""On-disk dataset format.

Layout under a dataset directory:

    meta.json       camera intrinsics, rate, frame count, instance/feature tables
    poses.csv       timestamp + row-major 4x4 camera-to-world matrix
    hands.csv       timestamp, x, y, z
    depth/%06d.bin  little-endian float32, row-major H*W
    inst/%06d.bin   little-endian uint32, row-major H*W
    disp/%06d.bin   optional normalized disparity, float32
    gt.json         joints, per-frame states, relationships (+ gt_mesh.bin)
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import DatasetError
from ..geom import CameraModel, Pose
from .scene import SceneSpec
from .simulate import Frame, GroundTruth


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(out_dir, frames, camera: CameraModel, rate: float,
                  scene: SceneSpec, gt: GroundTruth | None = None) -> None:
    out = Path(out_dir)
    (out / "depth").mkdir(parents=True, exist_ok=True)
    (out / "inst").mkdir(exist_ok=True)
    has_disp = any(f.disparity is not None for f in frames)
    if has_disp:
        (out / "disp").mkdir(exist_ok=True)

    meta = {
        "width": camera.width,
        "height": camera.height,
        "fx": camera.fx,
        "fy": camera.fy,
        "cx": camera.cx,
        "cy": camera.cy,
        "rate": rate,
        "n_frames": len(frames),
        "scene_name": scene.name,
        "feature_dim": scene.feature_dim,
        "instances": {
            str(e.id): {"label": e.label, "background": bool(getattr(e, "background", False))}
            for e in (*scene.statics, *scene.parts, *scene.items)
        },
        "features": {k: [float(v) for v in vec] for k, vec in sorted(scene.features.items())},
    }
    _dump_json(out / "meta.json", meta)

    with open(out / "poses.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp"] + [f"m{i}{j}" for i in range(4) for j in range(4)])
        for f in frames:
            w.writerow([_fmt(f.timestamp)] + [_fmt(v) for v in f.camera_pose.matrix().ravel()])
    with open(out / "hands.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "x", "y", "z"])
        for f in frames:
            w.writerow([_fmt(f.timestamp)] + [_fmt(v) for v in f.hand])

    for k, f in enumerate(frames):
        np.asarray(f.depth, dtype="<f4").tofile(out / "depth" / f"{k:06d}.bin")
        np.asarray(f.instance_map, dtype="<u4").tofile(out / "inst" / f"{k:06d}.bin")
        if f.disparity is not None:
            np.asarray(f.disparity, dtype="<f4").tofile(out / "disp" / f"{k:06d}.bin")

    if gt is not None:
        gt.mesh_points.astype("<f4").tofile(out / "gt_mesh.bin")
        _dump_json(out / "gt.json", _gt_to_dict(gt))


def _dump_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _gt_to_dict(gt: GroundTruth) -> dict:
    return {
        "timestamps": [float(t) for t in gt.timestamps],
        "joints": {
            str(pid): {
                "kind": j["kind"],
                "axis": [float(v) for v in j["axis"]],
                "pivot": None if j["pivot"] is None else [float(v) for v in j["pivot"]],
                "label": j["label"],
                "box_lo": [float(v) for v in j["box"][0]],
                "box_hi": [float(v) for v in j["box"][1]],
            }
            for pid, j in gt.joints.items()
        },
        "states": {str(pid): [float(v) for v in arr] for pid, arr in gt.states.items()},
        "relationships": gt.relationships,
        "items": {
            str(iid): {
                "label": it["label"],
                "box_lo": [float(v) for v in it["box"][0]],
                "box_hi": [float(v) for v in it["box"][1]],
                "parent": it["parent"],
                "relation": it["relation"],
                "handle": bool(it["handle"]),
            }
            for iid, it in gt.items.items()
        },
        "statics": {
            str(sid): {
                "label": st["label"],
                "box_lo": [float(v) for v in st["box"][0]],
                "box_hi": [float(v) for v in st["box"][1]],
                "background": bool(st["background"]),
            }
            for sid, st in gt.statics.items()
        },
        "events": gt.events,
        "handles": {str(pid): hid for pid, hid in gt.handles.items()},
        "features": {k: [float(v) for v in vec] for k, vec in sorted(gt.features.items())},
        "background_ids": sorted(gt.background_ids),
        "mesh_file": "gt_mesh.bin",
    }


def gt_from_dict(data: dict, mesh_points: np.ndarray) -> GroundTruth:
    return GroundTruth(
        timestamps=np.asarray(data["timestamps"], dtype=np.float64),
        joints={
            int(pid): {
                "kind": j["kind"],
                "axis": np.asarray(j["axis"], float),
                "pivot": None if j["pivot"] is None else np.asarray(j["pivot"], float),
                "label": j["label"],
                "box": (np.asarray(j["box_lo"], float), np.asarray(j["box_hi"], float)),
            }
            for pid, j in data["joints"].items()
        },
        states={int(pid): np.asarray(arr, float) for pid, arr in data["states"].items()},
        relationships=data["relationships"],
        items={
            int(iid): {
                "label": it["label"],
                "box": (np.asarray(it["box_lo"], float), np.asarray(it["box_hi"], float)),
                "parent": it["parent"],
                "relation": it["relation"],
                "handle": it["handle"],
            }
            for iid, it in data["items"].items()
        },
        statics={
            int(sid): {
                "label": st["label"],
                "box": (np.asarray(st["box_lo"], float), np.asarray(st["box_hi"], float)),
                "background": st["background"],
            }
            for sid, st in data["statics"].items()
        },
        events=data["events"],
        handles={int(pid): hid for pid, hid in data["handles"].items()},
        features={k: np.asarray(v, float) for k, v in data["features"].items()},
        background_ids=frozenset(data["background_ids"]),
        mesh_points=mesh_points,
    )


class Dataset:
    """In-memory view of a dataset directory."""

    def __init__(self, frames, camera, rate, meta, gt=None):
        self.frames = frames
        self.camera = camera
        self.rate = rate
        self.meta = meta
        self.gt = gt

    @property
    def instances(self) -> dict:
        return {int(k): v for k, v in self.meta["instances"].items()}

    @property
    def features(self) -> dict:
        return {k: np.asarray(v, float) for k, v in self.meta["features"].items()}

    @property
    def background_ids(self) -> frozenset:
        return frozenset(i for i, info in self.instances.items() if info["background"])


def _read_bin(path: Path, dtype, shape, frame: int, kind: str) -> np.ndarray:
    if not path.exists():
        raise DatasetError(f"frame {frame:06d}: missing {kind} file {path.name}")
    raw = np.fromfile(path, dtype=dtype)
    expected = int(np.prod(shape))
    if raw.size != expected:
        raise DatasetError(
            f"frame {frame:06d}: {kind} file truncated "
            f"(expected {expected} values, got {raw.size})"
        )
    return raw.reshape(shape)


def read_dataset(dataset_dir, load_gt: bool = True) -> Dataset:
    root = Path(dataset_dir)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise DatasetError(f"{root}: missing meta.json")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
        camera = CameraModel(
            fx=meta["fx"], fy=meta["fy"], cx=meta["cx"], cy=meta["cy"],
            width=meta["width"], height=meta["height"],
        )
        n_frames = int(meta["n_frames"])
        rate = float(meta["rate"])
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DatasetError(f"meta.json malformed: {exc}") from exc

    poses = _read_csv_rows(root / "poses.csv", 17, n_frames)
    hands = _read_csv_rows(root / "hands.csv", 4, n_frames)
    shape = (camera.height, camera.width)
    has_disp = (root / "disp").is_dir()

    frames = []
    for k in range(n_frames):
        depth = _read_bin(root / "depth" / f"{k:06d}.bin", "<f4", shape, k, "depth")
        inst = _read_bin(root / "inst" / f"{k:06d}.bin", "<u4", shape, k, "instance")
        disp = None
        if has_disp:
            disp = _read_bin(root / "disp" / f"{k:06d}.bin", "<f4", shape, k, "disparity")
        pose = Pose.from_matrix(poses[k, 1:].reshape(4, 4))
        if abs(poses[k, 0] - hands[k, 0]) > 1e-9:
            raise DatasetError(f"frame {k:06d}: pose/hand timestamp mismatch")
        frames.append(
            Frame(
                timestamp=float(poses[k, 0]),
                hand=hands[k, 1:4].copy(),
                depth=depth,
                instance_map=inst.astype(np.int64),
                camera_pose=pose,
                disparity=disp,
            )
        )

    gt = None
    gt_path = root / "gt.json"
    if load_gt and gt_path.exists():
        try:
            with open(gt_path) as fh:
                gt_data = json.load(fh)
            mesh = np.fromfile(root / gt_data["mesh_file"], dtype="<f4")
            gt = gt_from_dict(gt_data, mesh.reshape(-1, 3).astype(np.float64))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DatasetError(f"gt.json malformed: {exc}") from exc
    return Dataset(frames, camera, rate, meta, gt)


def _read_csv_rows(path: Path, n_cols: int, n_rows: int) -> np.ndarray:
    if not path.exists():
        raise DatasetError(f"missing {path.name}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    if len(body) != n_rows:
        raise DatasetError(f"{path.name}: expected {n_rows} rows, got {len(body)}")
    try:
        arr = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise DatasetError(f"{path.name}: non-numeric value ({exc})") from exc
    if arr.shape[1] != n_cols:
        raise DatasetError(f"{path.name}: expected {n_cols} columns, got {arr.shape[1]}")
    return arr
