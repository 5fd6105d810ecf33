"""Scene and interaction-script schemas (human-written JSON)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..artic.motion import JointModel
from ..errors import SceneSpecError

CONTAINS = "contains"
CONSTRAINS = "constrains"


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if np.any(hi < lo):
            raise SceneSpecError(f"box has hi < lo: {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def surface_points(self, spacing: float) -> np.ndarray:
        """Deterministic grid sampling of the box surface (all six faces)."""
        pts = []
        for ax in range(3):
            u, v = (ax + 1) % 3, (ax + 2) % 3
            nu = max(2, int(np.ceil((self.hi[u] - self.lo[u]) / spacing)) + 1)
            nv = max(2, int(np.ceil((self.hi[v] - self.lo[v]) / spacing)) + 1)
            gu = np.linspace(self.lo[u], self.hi[u], nu)
            gv = np.linspace(self.lo[v], self.hi[v], nv)
            uu, vv = np.meshgrid(gu, gv)
            for w in (self.lo[ax], self.hi[ax]):
                face = np.empty((uu.size, 3))
                face[:, ax] = w
                face[:, u] = uu.ravel()
                face[:, v] = vv.ravel()
                pts.append(face)
        allpts = np.concatenate(pts, axis=0)
        return np.unique(allpts, axis=0)


@dataclass(frozen=True)
class StaticEntity:
    id: int
    label: str
    box: Box
    background: bool = False


@dataclass(frozen=True)
class PartEntity:
    id: int
    label: str
    box: Box  # geometry in the closed (zero) state
    joint: JointModel
    max_state: float


@dataclass(frozen=True)
class ItemEntity:
    id: int
    label: str
    box: Box  # zero-state pose; constrained items move with the parent
    parent: int
    relation: str
    is_handle: bool = False


@dataclass(frozen=True)
class SceneSpec:
    name: str
    statics: tuple
    parts: tuple
    items: tuple
    feature_dim: int = 32
    features: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.id for e in (*self.statics, *self.parts, *self.items)]
        if len(set(ids)) != len(ids):
            raise SceneSpecError("entity ids must be unique")
        if any(i <= 0 for i in ids):
            raise SceneSpecError("entity ids must be positive (0 is reserved)")
        part_ids = {p.id for p in self.parts}
        for item in self.items:
            if item.parent not in part_ids:
                raise SceneSpecError(f"item {item.id} references unknown part {item.parent}")
            if item.relation not in (CONTAINS, CONSTRAINS):
                raise SceneSpecError(f"item {item.id} has bad relation {item.relation!r}")
            if item.is_handle and item.relation != CONSTRAINS:
                raise SceneSpecError(f"handle item {item.id} must be constrained")
        for part in self.parts:
            handles = [i for i in self.items if i.parent == part.id and i.is_handle]
            if len(handles) != 1:
                raise SceneSpecError(f"part {part.id} needs exactly one handle item")
        for item in self.items:
            if item.relation == CONSTRAINS:
                part = self.part(item.parent)
                gap = np.maximum(item.box.lo - part.box.hi, part.box.lo - item.box.hi)
                if float(np.linalg.norm(np.maximum(gap, 0.0))) > 0.02:
                    raise SceneSpecError(
                        f"constrained item {item.id} does not touch part {item.parent}"
                    )
        if not self.features:
            object.__setattr__(
                self, "features", make_feature_table(self.labels(), self.feature_dim)
            )

    def labels(self) -> list:
        return sorted({e.label for e in (*self.statics, *self.parts, *self.items)})

    def part(self, part_id: int) -> PartEntity:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise SceneSpecError(f"unknown part id {part_id}")

    def handle_of(self, part_id: int) -> ItemEntity:
        for i in self.items:
            if i.parent == part_id and i.is_handle:
                return i
        raise SceneSpecError(f"part {part_id} has no handle")

    def entity_label(self, entity_id: int) -> str:
        for e in (*self.statics, *self.parts, *self.items):
            if e.id == entity_id:
                return e.label
        raise SceneSpecError(f"unknown entity id {entity_id}")


@dataclass(frozen=True)
class ScriptEvent:
    part: int
    start: float
    end: float
    delta: float


@dataclass(frozen=True)
class CameraWaypoint:
    t: float
    pos: np.ndarray
    look_at: np.ndarray


@dataclass(frozen=True)
class InteractionScript:
    duration: float
    camera: tuple
    events: tuple
    approach: float = 1.0
    hand_rest_offset: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.35, 0.15])
    )

    def __post_init__(self):
        if self.duration <= 0:
            raise SceneSpecError("duration must be positive")
        if len(self.camera) < 1:
            raise SceneSpecError("camera path needs at least one waypoint")
        ordered = sorted(self.events, key=lambda e: e.start)
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end:
                raise SceneSpecError(f"events overlap at t={b.start}")
        for e in ordered:
            if e.end <= e.start:
                raise SceneSpecError(f"event on part {e.part} has end <= start")
        object.__setattr__(self, "events", tuple(ordered))
        object.__setattr__(
            self,
            "hand_rest_offset",
            np.asarray(self.hand_rest_offset, dtype=np.float64).reshape(3),
        )

    def validate_against(self, scene: SceneSpec):
        for e in self.events:
            scene.part(e.part)  # raises on unknown part
        # cumulative state must stay within [0, max_state]
        state = {p.id: 0.0 for p in scene.parts}
        for e in self.events:
            state[e.part] += e.delta
            part = scene.part(e.part)
            if state[e.part] < -1e-9 or state[e.part] > part.max_state + 1e-9:
                raise SceneSpecError(
                    f"event drives part {e.part} to state {state[e.part]:.3f}, "
                    f"outside [0, {part.max_state}]"
                )


def make_feature_table(labels, dim: int) -> dict:
    """Deterministic unit feature vector per label (stand-in for image features).

    When the label count fits in `dim`, vectors are mutually orthogonal so
    distinct labels never pass a cosine-similarity merge.
    """
    labels = sorted(labels)
    digest = hashlib.sha256(("features:" + "|".join(labels)).encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    mat = rng.standard_normal((dim, len(labels)))
    if len(labels) <= dim:
        q, _ = np.linalg.qr(mat)
        vecs = q.T
    else:
        vecs = mat.T / np.linalg.norm(mat.T, axis=1, keepdims=True)
    return {lab: vecs[i].copy() for i, lab in enumerate(labels)}


def _parse_box(node, where: str) -> Box:
    if "box" in node:
        lo, hi = node["box"]
        return Box(lo, hi)
    if "plane" in node:
        pl = node["plane"]
        ax = {"x": 0, "y": 1, "z": 2}[pl["axis"]]
        u, v = (ax + 1) % 3, (ax + 2) % 3
        lo = np.zeros(3)
        hi = np.zeros(3)
        lo[ax] = hi[ax] = pl["offset"]
        (lo[u], lo[v]), (hi[u], hi[v]) = pl["extent"]
        return Box(lo, hi)
    raise SceneSpecError(f"{where}: needs 'box' or 'plane'")


def scene_from_dict(data: dict) -> SceneSpec:
    try:
        statics = tuple(
            StaticEntity(
                id=int(n["id"]),
                label=n["label"],
                box=_parse_box(n, f"static {n.get('id')}"),
                background=bool(n.get("background", False)),
            )
            for n in data.get("statics", [])
        )
        parts = []
        for n in data.get("parts", []):
            jn = n["joint"]
            joint = JointModel(jn["kind"], np.asarray(jn["axis"], float), jn.get("pivot"))
            parts.append(
                PartEntity(
                    id=int(n["id"]),
                    label=n["label"],
                    box=_parse_box(n, f"part {n.get('id')}"),
                    joint=joint,
                    max_state=float(n.get("max_state", np.inf)),
                )
            )
        items = tuple(
            ItemEntity(
                id=int(n["id"]),
                label=n["label"],
                box=_parse_box(n, f"item {n.get('id')}"),
                parent=int(n["parent"]),
                relation=n["relation"],
                is_handle=bool(n.get("handle", False)),
            )
            for n in data.get("items", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneSpecError(f"malformed scene spec: {exc}") from exc
    return SceneSpec(
        name=data.get("name", "scene"),
        statics=statics,
        parts=tuple(parts),
        items=items,
        feature_dim=int(data.get("feature_dim", 32)),
    )


def script_from_dict(data: dict) -> InteractionScript:
    try:
        camera = tuple(
            CameraWaypoint(float(w["t"]), np.asarray(w["pos"], float), np.asarray(w["look_at"], float))
            for w in data["camera"]
        )
        events = tuple(
            ScriptEvent(int(e["part"]), float(e["start"]), float(e["end"]), float(e["delta"]))
            for e in data.get("events", [])
        )
        kwargs = {}
        if "approach" in data:
            kwargs["approach"] = float(data["approach"])
        if "hand_rest_offset" in data:
            kwargs["hand_rest_offset"] = np.asarray(data["hand_rest_offset"], float)
        return InteractionScript(
            duration=float(data["duration"]), camera=camera, events=events, **kwargs
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneSpecError(f"malformed script: {exc}") from exc


def load_scene(path) -> SceneSpec:
    with open(Path(path)) as fh:
        return scene_from_dict(json.load(fh))


def load_script(path) -> InteractionScript:
    with open(Path(path)) as fh:
        return script_from_dict(json.load(fh))
