"""Synthetic scene simulator and dataset reader/writer.

Scenes are assemblies of labeled axis-aligned boxes (planes are zero-thickness
boxes). Articulated parts carry a ground-truth joint; constrained items and
handles move rigidly with their parent part. Rendering is an exact ray caster,
so rendered depth agrees with analytic geometry to machine precision.
"""

from .dataset import read_dataset, write_dataset
from .render import render_frame
from .scene import InteractionScript, SceneSpec, load_scene, load_script
from .simulate import Frame, GroundTruth, simulate

__all__ = [
    "Frame",
    "GroundTruth",
    "InteractionScript",
    "SceneSpec",
    "load_scene",
    "load_script",
    "read_dataset",
    "render_frame",
    "simulate",
    "write_dataset",
]
