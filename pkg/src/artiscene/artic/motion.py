"""Joint models and the one-dimensional rigid motion operator.

A joint is either prismatic (unit axis u, state in meters) or revolute (unit
axis u through pivot x, state in radians). The motion operator applied with
interpolation factor beta moves points by an amount -beta * dtheta, i.e. it
articulates geometry *back* toward its earlier configuration; beta = -1 moves
geometry forward by +dtheta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import Pose, _as_points

PRISMATIC = "prismatic"
REVOLUTE = "revolute"

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class JointModel:
    kind: str
    axis: np.ndarray
    pivot: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (PRISMATIC, REVOLUTE):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > _UNIT_TOL:
            raise ValueError("joint axis must be a unit vector")
        object.__setattr__(self, "axis", axis)
        if self.kind == REVOLUTE:
            if self.pivot is None:
                raise ValueError("revolute joint requires a pivot")
            object.__setattr__(
                self, "pivot", np.asarray(self.pivot, dtype=np.float64).reshape(3)
            )
        elif self.pivot is not None:
            raise ValueError("prismatic joint must not carry a pivot")

    @property
    def is_revolute(self) -> bool:
        return self.kind == REVOLUTE


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    c = np.cos(angle)
    s = np.sin(angle)
    ux, uy, uz = axis
    cross = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def joint_transform(joint: JointModel, amount: float) -> Pose:
    """Pose moving zero-state geometry forward by +amount along the joint."""
    if joint.kind == PRISMATIC:
        return Pose(np.eye(3), amount * joint.axis)
    rot = rotation_about_axis(joint.axis, amount)
    return Pose(rot, joint.pivot - rot @ joint.pivot)


def rigid_motion(points, beta: float, joint: JointModel, dtheta: float) -> np.ndarray:
    """Apply the motion operator: articulate points by an amount -beta*dtheta."""
    pts = _as_points(points)
    return joint_transform(joint, -beta * dtheta).transform(pts)


def prismatic_amount(h1, hj, axis) -> float:
    """Articulation amount between two hand poses under a prismatic joint."""
    return float(np.dot(np.asarray(hj, float) - np.asarray(h1, float), axis))


def revolute_amount(h1, hj, axis, pivot) -> float:
    """Signed angle from h1 to hj about the axis, projected onto its normal plane."""
    axis = np.asarray(axis, dtype=np.float64)
    a = np.asarray(h1, float) - pivot
    b = np.asarray(hj, float) - pivot
    a = a - np.dot(a, axis) * axis
    b = b - np.dot(b, axis) * axis
    return float(np.arctan2(np.dot(axis, np.cross(a, b)), np.dot(a, b)))


def articulation_amount(joint: JointModel, h1, hj) -> float:
    if joint.kind == PRISMATIC:
        return prismatic_amount(h1, hj, joint.axis)
    return revolute_amount(h1, hj, joint.axis, joint.pivot)
