"""Frame sequence generation: camera path, hand animation, ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..artic.motion import joint_transform
from ..errors import SceneSpecError
from ..geom import CameraModel, Pose
from .render import render_frame
from .scene import CONSTRAINS, InteractionScript, SceneSpec

GT_MESH_SPACING = 0.02


@dataclass(frozen=True)
class Frame:
    """One timestamped observation."""

    timestamp: float
    hand: np.ndarray
    depth: np.ndarray
    instance_map: np.ndarray
    camera_pose: Pose
    disparity: np.ndarray | None = None


@dataclass
class GroundTruth:
    """Everything the simulator knows, bundled for evaluation."""

    timestamps: np.ndarray
    joints: dict  # part_id -> {kind, axis, pivot, label, box}
    states: dict  # part_id -> per-frame state array
    relationships: list  # {parent, child, child_label, kind}
    items: dict  # item_id -> {label, box, parent, relation, handle}
    statics: dict  # static_id -> {label, box, background}
    events: list  # {part, start, end, delta}
    handles: dict  # part_id -> handle item id
    mesh_points: np.ndarray  # final-state surface sampling of the whole scene
    features: dict  # label -> unit feature vector
    background_ids: frozenset = field(default_factory=frozenset)

    def state_at(self, part_id: int, t: float) -> float:
        k = int(np.searchsorted(self.timestamps, t + 1e-12) - 1)
        k = max(0, min(k, len(self.timestamps) - 1))
        return float(self.states[part_id][k])


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(fwd)
    if norm < 1e-12:
        raise SceneSpecError("camera waypoint looks at its own position")
    z = fwd / norm
    up = np.asarray(up, dtype=np.float64)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-9:  # looking straight up/down
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return Pose(np.stack([x, y, z], axis=1), eye)


def camera_pose_at(script: InteractionScript, t: float) -> Pose:
    ts = np.array([w.t for w in script.camera])
    pos = np.array([w.pos for w in script.camera])
    tgt = np.array([w.look_at for w in script.camera])
    eye = np.array([np.interp(t, ts, pos[:, k]) for k in range(3)])
    look = np.array([np.interp(t, ts, tgt[:, k]) for k in range(3)])
    return look_at_pose(eye, look)


def part_states_at(scene: SceneSpec, script: InteractionScript, t: float) -> dict:
    """Ground-truth articulation state per part (linear ramp during events)."""
    states = {p.id: 0.0 for p in scene.parts}
    for e in script.events:
        if t >= e.end:
            states[e.part] += e.delta
        elif t > e.start:
            states[e.part] += e.delta * (t - e.start) / (e.end - e.start)
    return states


def _handle_anchor(scene: SceneSpec, part_id: int, state: float) -> np.ndarray:
    handle = scene.handle_of(part_id)
    part = scene.part(part_id)
    return joint_transform(part.joint, state).transform(handle.box.center[None, :])[0]


def _hand_position(scene, script, t: float, states: dict, cam: Pose) -> np.ndarray:
    rest = cam.translation + cam.rotation @ script.hand_rest_offset
    for e in script.events:
        if e.start <= t <= e.end:
            return _handle_anchor(scene, e.part, states[e.part])
        if e.start - script.approach <= t < e.start:
            a = (t - (e.start - script.approach)) / script.approach
            target = _handle_anchor(scene, e.part, part_states_at(scene, script, e.start)[e.part])
            return (1.0 - a) * rest + a * target
        if e.end < t <= e.end + script.approach:
            a = (t - e.end) / script.approach
            source = _handle_anchor(scene, e.part, states[e.part])
            return (1.0 - a) * source + a * rest
    return rest


def scene_mesh_points(scene: SceneSpec, states: dict, spacing: float = GT_MESH_SPACING) -> np.ndarray:
    """Surface sampling of every entity at the given articulation states."""
    clouds = []
    for st in scene.statics:
        clouds.append(st.box.surface_points(spacing))
    for part in scene.parts:
        pose = joint_transform(part.joint, states[part.id])
        clouds.append(pose.transform(part.box.surface_points(spacing)))
    for item in scene.items:
        pts = item.box.surface_points(spacing)
        if item.relation == CONSTRAINS:
            pose = joint_transform(scene.part(item.parent).joint, states[item.parent])
            pts = pose.transform(pts)
        clouds.append(pts)
    return np.concatenate(clouds, axis=0)


def simulate(
    scene: SceneSpec,
    script: InteractionScript,
    camera: CameraModel,
    rate: float = 10.0,
    hand_noise_sigma: float = 0.005,
    seed: int = 0,
    disparity_params: tuple | None = None,
    disparity_outlier_fraction: float = 0.0,
):
    """Render the scripted scene into frames plus ground truth.

    `disparity_params = (s_true, s0_true)` additionally emits normalized
    disparity per frame, generated by inverting the scale/shift depth model;
    a fraction of pixels can be replaced with outlier disparities.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    script.validate_against(scene)
    rng = np.random.default_rng(seed)
    n_frames = int(np.floor(script.duration * rate)) + 1
    timestamps = np.arange(n_frames) / rate

    frames = []
    states_per_part = {p.id: np.zeros(n_frames) for p in scene.parts}
    for k, t in enumerate(timestamps):
        states = part_states_at(scene, script, t)
        for pid, s in states.items():
            states_per_part[pid][k] = s
        cam_pose = camera_pose_at(script, t)
        depth, inst = render_frame(scene, states, cam_pose, camera)
        # float32 matches the on-disk format, keeping dataset round-trips lossless
        depth = depth.astype(np.float32)
        hand = _hand_position(scene, script, t, states, cam_pose)
        if hand_noise_sigma > 0.0:
            hand = hand + rng.normal(0.0, hand_noise_sigma, 3)
        disp = None
        if disparity_params is not None:
            disp = _make_disparity(
                depth.astype(np.float64), disparity_params, disparity_outlier_fraction, rng
            ).astype(np.float32)
        frames.append(
            Frame(
                timestamp=float(t),
                hand=hand,
                depth=depth,
                instance_map=inst,
                camera_pose=cam_pose,
                disparity=disp,
            )
        )

    final_states = part_states_at(scene, script, script.duration)
    gt = GroundTruth(
        timestamps=timestamps,
        joints={
            p.id: {
                "kind": p.joint.kind,
                "axis": p.joint.axis.copy(),
                "pivot": None if p.joint.pivot is None else p.joint.pivot.copy(),
                "label": p.label,
                "box": (p.box.lo.copy(), p.box.hi.copy()),
            }
            for p in scene.parts
        },
        states=states_per_part,
        relationships=[
            {"parent": i.parent, "child": i.id, "child_label": i.label, "kind": i.relation}
            for i in scene.items
        ],
        items={
            i.id: {
                "label": i.label,
                "box": (i.box.lo.copy(), i.box.hi.copy()),
                "parent": i.parent,
                "relation": i.relation,
                "handle": i.is_handle,
            }
            for i in scene.items
        },
        statics={
            s.id: {
                "label": s.label,
                "box": (s.box.lo.copy(), s.box.hi.copy()),
                "background": s.background,
            }
            for s in scene.statics
        },
        events=[
            {"part": e.part, "start": e.start, "end": e.end, "delta": e.delta}
            for e in script.events
        ],
        handles={p.id: scene.handle_of(p.id).id for p in scene.parts},
        mesh_points=scene_mesh_points(scene, final_states),
        features={k: np.asarray(v, float) for k, v in scene.features.items()},
        background_ids=frozenset(s.id for s in scene.statics if s.background),
    )
    return frames, gt


def _make_disparity(depth, params, outlier_fraction, rng):
    s_true, s0_true = params
    disp = np.full_like(depth, -s0_true)  # misses invert to infinite depth
    valid = depth > 0.0
    disp[valid] = s_true / depth[valid] - s0_true
    if outlier_fraction > 0.0:
        flat = disp.ravel()
        n_out = int(round(outlier_fraction * flat.size))
        idx = rng.choice(flat.size, size=n_out, replace=False)
        lo, hi = flat.min(), flat.max() + 1.0
        flat[idx] = rng.uniform(lo, hi, n_out)
        disp = flat.reshape(depth.shape)
    return disp
