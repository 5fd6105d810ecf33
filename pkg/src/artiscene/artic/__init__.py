"""Articulation model estimation and tracking.

Submodules:

* motion: joint models and the 1-DOF rigid motion operator
* fusion: static-interval depth accumulation and moving-part extraction
* initfit: line/arc classification and initial joint guesses
* fit: joint refinement by damped quasi-Newton descent
* update: revisit matching and articulation-state updates
"""

from .fit import FitConfig, FitResult, fit_joint
from .fusion import extract_part, fuse_static
from .initfit import classify_and_init
from .motion import JointModel, joint_transform, rigid_motion
from .update import match_revisited, update_state

__all__ = [
    "FitConfig",
    "FitResult",
    "JointModel",
    "classify_and_init",
    "extract_part",
    "fit_joint",
    "fuse_static",
    "joint_transform",
    "match_revisited",
    "rigid_motion",
    "update_state",
]
