"""Revisited-object matching and articulation-state updates.

A revisited interaction is recognized by the overlap between the hand ball at
interaction start and each known part cloud. States are then updated by
sweeping the hand sequence: whenever the hand overlaps the currently
transformed cloud, the articulation amount from the anchor hand is folded in
(keeping the running maximum) and the cloud is re-transformed from its
original pose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import PointCloud, RadiusHash
from .motion import JointModel, articulation_amount, joint_transform

DEFAULT_HAND_RADIUS = 0.10


def match_revisited(hand_start, parts, sigma: float, hand_radius: float = DEFAULT_HAND_RADIUS):
    """Index of the known part whose cloud best overlaps the starting hand ball.

    Returns None when the best overlap fraction does not exceed `sigma`.
    """
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0, 1)")
    hand = np.asarray(hand_start, dtype=np.float64)
    best_idx = None
    best_frac = 0.0
    for idx, cloud in enumerate(parts):
        if cloud.is_empty:
            continue
        frac = RadiusHash(cloud.points, hand_radius).count(hand) / len(cloud)
        if frac > best_frac:
            best_frac = frac
            best_idx = idx
    return best_idx if best_frac > sigma else None


@dataclass(frozen=True)
class UpdateResult:
    cloud: PointCloud
    dtheta: float
    phi: float
    phi_trace: np.ndarray  # running phi after each hand, monotone by construction


def update_state(
    part: PointCloud,
    joint: JointModel,
    dtheta: float,
    hands,
    sigma: float,
    hand_radius: float = DEFAULT_HAND_RADIUS,
) -> UpdateResult:
    """Track the articulation amount through one revisit interaction.

    The first hand is the anchor; each later hand that overlaps the current
    cloud raises phi to max(amount(anchor -> hand), phi) and the cloud is
    re-transformed from its original pose by phi. Returns the final cloud and
    dtheta' = dtheta + phi.
    """
    hands = np.asarray(hands, dtype=np.float64)
    if hands.ndim != 2 or hands.shape[0] < 1:
        raise ValueError("need at least one hand position")
    anchor = hands[0]
    phi = 0.0
    current = part.points
    index = RadiusHash(current, hand_radius)
    n = len(part)
    trace = np.zeros(hands.shape[0])
    for j, hand in enumerate(hands):
        if index.count(hand) / n > sigma:
            amount = articulation_amount(joint, anchor, hand)
            if amount > phi:
                phi = amount
                current = joint_transform(joint, phi).transform(part.points)
                index = RadiusHash(current, hand_radius)
        trace[j] = phi
    return UpdateResult(
        cloud=PointCloud(current, part.instance_ids),
        dtheta=float(dtheta + phi),
        phi=float(phi),
        phi_trace=trace,
    )
