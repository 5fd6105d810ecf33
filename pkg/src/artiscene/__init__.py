"""Articulated 3D scene graphs from egocentric observation streams.

Builds a two-layer scene graph (voxel geometry + object layer with
contains/constrains relations) by detecting hand-scene interaction intervals,
fitting prismatic/revolute joint models, and tracking articulation states.
Ships with an exact ray-casting simulator that provides ground truth for
end-to-end verification.
"""

__version__ = "0.1.0"
