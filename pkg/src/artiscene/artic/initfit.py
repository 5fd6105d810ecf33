"""Joint-type classification and initial guesses from the hand trajectory.

Fits a 3D line (principal axis) and a circle (plane fit + algebraic circle,
geometrically refined) to the interaction hand path, then classifies the
joint from the fit residuals.

Detected interaction windows over-cover the true contact span by up to the
smoothing kernel, so the window ends can contain approach/retreat hands far
off the motion path. Fits are therefore decided on the temporal core of the
window and extended outward only while residuals stay consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInteractionError
from .motion import PRISMATIC, REVOLUTE, JointModel

MIN_SPREAD = 0.01
# a circle this large over a desk-scale path is a line in disguise
MAX_CIRCLE_RADIUS = 50.0
# revolute only when the arc explains the path much better than the line;
# a plain argmin would pick the circle on any noisy straight path, since the
# extra parameters always absorb some noise
CIRCLE_GAIN = 0.5
# window ends join the fit only while within max(4 * core rms, this floor)
OUTLIER_FLOOR = 0.02


@dataclass(frozen=True)
class InitGuess:
    kind: str
    joint: JointModel
    dtheta0: float
    line_rms: float
    circle_rms: float  # inf when the circle fit is degenerate
    inliers: np.ndarray  # hands kept for estimation (bool mask)

    @property
    def n_inliers(self) -> int:
        return int(np.count_nonzero(self.inliers))


@dataclass(frozen=True)
class _CircleFit:
    center: np.ndarray
    radius: float
    normal: np.ndarray
    rms: float


def fit_line(hands: np.ndarray):
    """Principal-axis line fit: returns (point, unit direction, rms distance)."""
    mean = hands.mean(axis=0)
    centered = hands - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    resid = centered - np.outer(centered @ direction, direction)
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    return mean, direction, rms


def line_residuals(hands: np.ndarray, point: np.ndarray, direction: np.ndarray) -> np.ndarray:
    rel = hands - point
    return np.linalg.norm(rel - np.outer(rel @ direction, direction), axis=1)


def fit_circle(hands: np.ndarray) -> _CircleFit | None:
    """Plane fit + algebraic (Kasa) circle fit, refined by Gauss-Newton."""
    mean = hands.mean(axis=0)
    centered = hands - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[2]
    e1, e2 = vt[0], vt[1]
    xy = np.stack([centered @ e1, centered @ e2], axis=1)

    a_mat = np.column_stack([2.0 * xy, np.ones(len(xy))])
    rhs = np.sum(xy**2, axis=1)
    sol, _, rank, _ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    if rank < 3:
        return None
    cx, cy, c = sol
    r2 = c + cx * cx + cy * cy
    if r2 <= 0.0:
        return None
    r = float(np.sqrt(r2))

    # geometric refinement of (cx, cy, r) in the plane
    for _ in range(20):
        diff = xy - np.array([cx, cy])
        rho = np.linalg.norm(diff, axis=1)
        if np.any(rho < 1e-12):
            break
        resid = rho - r
        jac = np.column_stack([-diff[:, 0] / rho, -diff[:, 1] / rho, -np.ones(len(xy))])
        try:
            step, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
        except np.linalg.LinAlgError:
            break
        cx, cy, r = cx + step[0], cy + step[1], r + step[2]
        if np.linalg.norm(step) < 1e-14:
            break
    if r <= 0.0:
        return None

    center3 = mean + cx * e1 + cy * e2
    fit = _CircleFit(center=center3, radius=r, normal=normal, rms=0.0)
    rms = float(np.sqrt(np.mean(circle_residuals(hands, fit) ** 2)))
    return _CircleFit(center=center3, radius=r, normal=normal, rms=rms)


def circle_residuals(hands: np.ndarray, fit: _CircleFit) -> np.ndarray:
    rel = hands - fit.center
    axial = rel @ fit.normal
    radial = np.linalg.norm(rel - np.outer(axial, fit.normal), axis=1)
    return np.sqrt(axial**2 + (radial - fit.radius) ** 2)


def _swept_angle(hands: np.ndarray, center: np.ndarray, normal: np.ndarray) -> float:
    """Total signed sweep about `normal`, accumulated over consecutive hands."""
    rel = hands - center
    rel = rel - np.outer(rel @ normal, normal)
    total = 0.0
    for a, b in zip(rel[:-1], rel[1:]):
        total += float(np.arctan2(np.dot(normal, np.cross(a, b)), np.dot(a, b)))
    return total


def _usable_circle(circle: _CircleFit | None) -> bool:
    return circle is not None and circle.radius <= MAX_CIRCLE_RADIUS


def _expand_inliers(n: int, lo: int, hi: int, resid: np.ndarray, thresh: float) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[lo:hi] = True
    k = lo - 1
    while k >= 0 and resid[k] <= thresh:
        mask[k] = True
        k -= 1
    k = hi
    while k < n and resid[k] <= thresh:
        mask[k] = True
        k += 1
    return mask


def classify_and_init(hands) -> InitGuess:
    """Classify the interaction as prismatic/revolute and build initial guesses.

    The returned axis is sign-canonical: dtheta0 >= 0 always.
    """
    hands = np.asarray(hands, dtype=np.float64)
    if hands.ndim != 2 or hands.shape[1] != 3 or hands.shape[0] < 3:
        raise DegenerateInteractionError("need at least 3 hand positions")
    spread = np.linalg.norm(hands.max(axis=0) - hands.min(axis=0))
    if spread <= MIN_SPREAD:
        raise DegenerateInteractionError(
            f"hand path spread {spread * 100:.2f} cm is too small to classify"
        )

    n = hands.shape[0]
    margin = n // 5
    lo, hi = (margin, n - margin) if n - 2 * margin >= 3 else (0, n)
    core = hands[lo:hi]

    point, direction, line_rms = fit_line(core)
    circle = fit_circle(core)
    circle_rms = circle.rms if _usable_circle(circle) else np.inf
    revolute = circle_rms <= CIRCLE_GAIN * line_rms

    if revolute:
        resid = circle_residuals(hands, circle)
        thresh = max(4.0 * circle_rms, OUTLIER_FLOOR)
    else:
        resid = line_residuals(hands, point, direction)
        thresh = max(4.0 * line_rms, OUTLIER_FLOOR)
    inliers = _expand_inliers(n, lo, hi, resid, thresh)
    kept = hands[inliers]

    if revolute:
        refined = fit_circle(kept)
        if not _usable_circle(refined):
            refined = circle
        sweep = _swept_angle(kept, refined.center, refined.normal)
        axis = refined.normal if sweep >= 0 else -refined.normal
        joint = JointModel(REVOLUTE, axis / np.linalg.norm(axis), refined.center)
        _, _, line_rms_kept = fit_line(kept)
        return InitGuess(REVOLUTE, joint, abs(sweep), line_rms_kept, refined.rms, inliers)

    point, direction, line_rms_kept = fit_line(kept)
    extent = float(np.dot(kept[-1] - kept[0], direction))
    axis = direction if extent >= 0 else -direction
    joint = JointModel(PRISMATIC, axis / np.linalg.norm(axis))
    circle_kept = fit_circle(kept)
    circle_rms_kept = circle_kept.rms if _usable_circle(circle_kept) else np.inf
    return InitGuess(PRISMATIC, joint, abs(extent), line_rms_kept, circle_rms_kept, inliers)


def random_init(hands, rng: np.random.Generator) -> InitGuess:
    """Random joint initialization (baseline mode); kind still from the fits."""
    hands = np.asarray(hands, dtype=np.float64)
    guess = classify_and_init(hands)
    axis = rng.normal(0.0, 1.0, 3)
    axis /= np.linalg.norm(axis)
    dtheta0 = float(rng.uniform(0.1, 1.5))
    if guess.kind == REVOLUTE:
        pivot = hands.mean(axis=0) + rng.uniform(-0.5, 0.5, 3)
        joint = JointModel(REVOLUTE, axis, pivot)
    else:
        joint = JointModel(PRISMATIC, axis)
    return InitGuess(
        guess.kind, joint, dtheta0, guess.line_rms, guess.circle_rms, guess.inliers
    )
