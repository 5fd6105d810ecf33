import numpy as np
import pytest

from artiscene.geom import CameraModel
from artiscene.sim.scene import scene_from_dict, script_from_dict


@pytest.fixture
def camera():
    return CameraModel(fx=48.0, fy=48.0, cx=31.5, cy=31.5, width=64, height=64)


def drawer_scene_dict():
    """Free-standing drawer on a cabinet block, sliding out along -x."""
    return {
        "name": "micro_drawer",
        "statics": [
            {"id": 1, "label": "floor", "box": [[-3, -3, -0.02], [3, 3, 0]], "background": True},
            {"id": 2, "label": "wall", "box": [[1.5, -3, 0], [1.56, 3, 2]], "background": True},
            {"id": 3, "label": "cabinet", "box": [[0.5, -0.4, 0.0], [1.1, 0.4, 0.7]]},
        ],
        "parts": [
            {
                "id": 10,
                "label": "drawer",
                "box": [[0.34, -0.3, 0.2], [0.5, 0.3, 0.5]],
                "joint": {"kind": "prismatic", "axis": [-1.0, 0.0, 0.0]},
                "max_state": 0.5,
            }
        ],
        "items": [
            {
                "id": 20,
                "label": "drawer_handle",
                "box": [[0.30, -0.05, 0.32], [0.34, 0.05, 0.38]],
                "parent": 10,
                "relation": "constrains",
                "handle": True,
            }
        ],
    }


def drawer_script_dict(delta=0.35):
    return {
        "duration": 16.0,
        "camera": [
            {"t": 0.0, "pos": [-0.8, -0.35, 1.0], "look_at": [0.5, 0.0, 0.35]},
            {"t": 16.0, "pos": [-0.8, 0.35, 1.0], "look_at": [0.5, 0.0, 0.35]},
        ],
        "events": [{"part": 10, "start": 6.0, "end": 9.0, "delta": delta}],
    }


@pytest.fixture
def drawer_scene():
    return scene_from_dict(drawer_scene_dict())


@pytest.fixture
def drawer_script():
    return script_from_dict(drawer_script_dict())


def box_surface_distance(points, lo, hi):
    """Unsigned distance from points to the *surface* of an axis-aligned box."""
    pts = np.asarray(points, dtype=np.float64)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    d_out = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    outside = np.linalg.norm(d_out, axis=1)
    inside_gap = np.minimum(pts - lo, hi - pts).min(axis=1)
    is_inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    return np.where(is_inside, np.maximum(inside_gap, 0.0), outside)
