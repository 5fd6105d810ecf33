"""Joint parameter refinement.

Minimizes

    lam_g * mean ||T(p, 1) - nn(p)||^2           (geometry-to-before-mesh)
  + lam_h * mean ||T(h_j, a_j) - h_1||^2         (hand-path consistency)
  + lam_p * (||A - A0|| + |dtheta - dtheta0|)    (stay near the init)

over the joint A = (axis[, pivot]), the state dtheta, and the per-hand
interpolation factors a_j (a_1 = 0, a_H = 1, monotone non-decreasing).

The axis is parametrized in tangent coordinates of the unit sphere and
re-retracted every outer iteration; nearest-neighbor correspondences are
re-linearized ICP-style per outer iteration and held fixed inside each
quasi-Newton inner solve. Gradients are analytic (checked against central
finite differences in the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from ..errors import InsufficientGeometryError
from ..geom import PointCloud
from .initfit import InitGuess
from .motion import PRISMATIC, REVOLUTE, JointModel, rotation_about_axis


@dataclass(frozen=True)
class FitConfig:
    lambda_g: float = 1.0
    lambda_h: float = 1.0
    lambda_p: float = 1e-4
    overlap_sigma: float = 0.05
    max_outer: int = 12
    max_inner: int = 60
    tol: float = 1e-12
    max_part_points: int = 4000

    def __post_init__(self):
        if self.lambda_g < 0 or self.lambda_h < 0 or self.lambda_p < 0:
            raise ValueError("weights must be nonnegative")
        if self.lambda_g == 0 and self.lambda_h == 0:
            raise ValueError("at least one of lambda_g, lambda_h must be positive")
        if not (0.0 < self.overlap_sigma < 1.0):
            raise ValueError("overlap_sigma must lie in (0, 1)")


@dataclass(frozen=True)
class FitResult:
    joint: JointModel
    dtheta: float
    alpha: np.ndarray
    part: PointCloud
    cost_geometry: float
    cost_hand: float
    cost_prior: float
    objective: float
    converged: bool
    n_outer: int


def _tangent_basis(u: np.ndarray) -> np.ndarray:
    pick = np.zeros(3)
    pick[np.argmin(np.abs(u))] = 1.0
    b1 = np.cross(u, pick)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(u, b1)
    return np.stack([b1, b2], axis=1)


def _revolute_terms(points, phis, u, x, target, wgt):
    """Residual value and gradient pieces for batched per-row rotations.

    Returns (value, grad_u, grad_x, gphi_rows); gphi_rows are d/dphi per row
    for the caller to chain into dtheta or alpha.
    """
    q = points - x
    c = np.cos(phis)
    s = np.sin(phis)
    uq = q @ u
    cross_uq = np.cross(np.broadcast_to(u, q.shape), q)
    rotated = c[:, None] * q + s[:, None] * cross_uq + ((1.0 - c) * uq)[:, None] * u
    resid = rotated + x - target
    value = wgt * float(np.sum(resid**2))

    dgdphi = -s[:, None] * q + c[:, None] * cross_uq + (s * uq)[:, None] * u
    gphi_rows = 2.0 * wgt * np.einsum("ij,ij->i", resid, dgdphi)

    one_c = 1.0 - c
    ur = resid @ u
    qxr = np.cross(q, resid)
    grad_u = 2.0 * wgt * (
        (s[:, None] * qxr).sum(axis=0) + (one_c * uq) @ resid + (one_c * ur) @ q
    )
    # d/dx = (I - R)^T r per row, with R^T r = rotation of r by -phi
    rt_r = (
        c[:, None] * resid
        - s[:, None] * np.cross(np.broadcast_to(u, resid.shape), resid)
        + (one_c * ur)[:, None] * u
    )
    grad_x = 2.0 * wgt * (resid - rt_r).sum(axis=0)
    return value, grad_u, grad_x, gphi_rows


def _prismatic_terms(points, betas, u, dtheta, target, wgt):
    """Value and gradient pieces for T(p, beta) = p - beta*dtheta*u."""
    resid = points - np.outer(betas * dtheta, u) - target
    value = wgt * float(np.sum(resid**2))
    ru = resid @ u
    grad_u = -2.0 * wgt * dtheta * (betas @ resid)
    grad_t = -2.0 * wgt * float(np.dot(betas, ru))
    gbeta_rows = -2.0 * wgt * dtheta * ru
    return value, grad_u, grad_t, gbeta_rows


class JointObjective:
    """Objective and analytic gradient for fixed NN correspondences.

    Parameter vector: [v0, v1, (px, py, pz,) dtheta, z_1 .. z_{H-1}] where the
    axis is u = normalize(u_ref + B v) and the hand factors are cumulative
    normalized squares of z (monotone, 0 at the first hand, 1 at the last).
    """

    def __init__(self, kind, u_ref, part_points, correspondences, hands,
                 lam_g, lam_h, lam_p, u0, x0, dtheta0):
        self.kind = kind
        self.u_ref = np.asarray(u_ref, float)
        self.basis = _tangent_basis(self.u_ref)
        self.part = part_points
        self.corr = correspondences
        self.hands = hands
        self.h1 = hands[0]
        self.n_hands = hands.shape[0]
        self.lam_g = lam_g
        self.lam_h = lam_h
        self.lam_p = lam_p
        self.u0 = u0
        self.x0 = x0
        self.dtheta0 = dtheta0
        self.revolute = kind == REVOLUTE
        self.n_params = 2 + (3 if self.revolute else 0) + 1 + (self.n_hands - 1)

    def pack(self, x, dtheta, alpha) -> np.ndarray:
        z = np.sqrt(np.maximum(np.diff(alpha), 0.0))
        head = [0.0, 0.0]
        if self.revolute:
            head.extend(x)
        head.append(dtheta)
        return np.concatenate([head, z])

    def unpack(self, vec):
        v = vec[:2]
        k = 2
        x = None
        if self.revolute:
            x = vec[2:5]
            k = 5
        dtheta = float(vec[k])
        z = vec[k + 1:]
        w = self.u_ref + self.basis @ v
        wn = float(np.linalg.norm(w))
        u = w / wn
        d = z * z
        total = float(d.sum())
        alpha = None
        if total > 0.0:
            alpha = np.concatenate([[0.0], np.cumsum(d)]) / total
        return u, wn, x, dtheta, z, alpha

    def state(self, vec):
        u, _, x, dtheta, _, alpha = self.unpack(vec)
        return u, x, dtheta, alpha

    def value_and_grad(self, vec):
        u, wn, x, dtheta, z, alpha = self.unpack(vec)
        if alpha is None:
            return np.inf, np.zeros_like(vec)
        value = 0.0
        grad_u = np.zeros(3)
        grad_x = np.zeros(3)
        grad_t = 0.0
        grad_alpha = np.zeros(self.n_hands)

        if self.lam_g > 0.0 and self.part is not None:
            wgt = self.lam_g / self.part.shape[0]
            if self.revolute:
                phis = np.full(self.part.shape[0], -dtheta)
                val, gu, gx, gphi = _revolute_terms(self.part, phis, u, x, self.corr, wgt)
                grad_u += gu
                grad_x += gx
                grad_t += -float(gphi.sum())  # phi = -dtheta
            else:
                betas = np.ones(self.part.shape[0])
                val, gu, gt, _ = _prismatic_terms(self.part, betas, u, dtheta, self.corr, wgt)
                grad_u += gu
                grad_t += gt
            value += val

        if self.lam_h > 0.0:
            wgt = self.lam_h / self.n_hands
            target = np.broadcast_to(self.h1, self.hands.shape)
            if self.revolute:
                phis = -alpha * dtheta
                val, gu, gx, gphi = _revolute_terms(self.hands, phis, u, x, target, wgt)
                grad_u += gu
                grad_x += gx
                grad_t += float(np.dot(gphi, -alpha))
                grad_alpha += gphi * -dtheta
            else:
                val, gu, gt, gbeta = _prismatic_terms(self.hands, alpha, u, dtheta, target, wgt)
                grad_u += gu
                grad_t += gt
                grad_alpha += gbeta
            value += val

        du = u - self.u0
        if self.revolute:
            dx = x - self.x0
            norm_a = float(np.sqrt(np.dot(du, du) + np.dot(dx, dx)))
        else:
            dx = None
            norm_a = float(np.linalg.norm(du))
        value += self.lam_p * (norm_a + abs(dtheta - self.dtheta0))
        if self.lam_p > 0.0 and norm_a > 0.0:
            grad_u += self.lam_p * du / norm_a
            if self.revolute:
                grad_x += self.lam_p * dx / norm_a
        if self.lam_p > 0.0 and dtheta != self.dtheta0:
            grad_t += self.lam_p * float(np.sign(dtheta - self.dtheta0))

        # chain: u(v) on the sphere tangent, alpha(z) through cumulative squares
        jac_u = (np.eye(3) - np.outer(u, u)) @ self.basis / wn
        grad_v = jac_u.T @ grad_u
        total = float(np.sum(z * z))
        rev_cum = np.cumsum(grad_alpha[::-1])[::-1]
        suffix = rev_cum[1:]  # sum of grad_alpha over hands after gap i
        dot_ga = float(np.dot(grad_alpha, alpha))
        grad_z = 2.0 * z * (suffix - dot_ga) / total

        grad = np.empty_like(vec)
        grad[:2] = grad_v
        k = 2
        if self.revolute:
            grad[2:5] = grad_x
            k = 5
        grad[k] = grad_t
        grad[k + 1:] = grad_z
        return float(value), grad


def _chord_alpha(hands: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(hands, axis=0), axis=1)
    total = seg.sum()
    if total <= 0.0:
        return np.linspace(0.0, 1.0, hands.shape[0])
    return np.concatenate([[0.0], np.cumsum(seg)]) / total


def _subsample(points: np.ndarray, limit: int) -> np.ndarray:
    if points.shape[0] <= limit:
        return points
    idx = np.unique(np.round(np.linspace(0, points.shape[0] - 1, limit)).astype(int))
    return points[idx]


def fit_joint(
    part: PointCloud,
    mesh_before: PointCloud | None,
    hands,
    init: InitGuess,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Refine an initial joint guess against geometry and hand evidence.

    Returns the best iterate found; `converged` is False when the outer loop
    exhausted its budget before the objective stabilized.
    """
    hands = np.asarray(hands, dtype=np.float64)
    if part.is_empty:
        raise InsufficientGeometryError("cannot fit a joint to an empty part")
    use_geometry = cfg.lambda_g > 0.0
    if use_geometry and (mesh_before is None or mesh_before.is_empty):
        raise InsufficientGeometryError("geometry term requires a before-mesh")

    pts = _subsample(part.points, cfg.max_part_points)
    tree = cKDTree(mesh_before.points) if use_geometry else None
    kind = init.kind
    u = init.joint.axis.copy()
    x = init.joint.pivot.copy() if init.joint.pivot is not None else None
    dtheta = float(init.dtheta0)
    alpha = _chord_alpha(hands)
    u0 = u.copy()
    x0 = None if x is None else x.copy()
    dtheta0 = dtheta

    def correspondences(u_, x_, dtheta_):
        if not use_geometry:
            return None
        moved = _transform_points(pts, kind, u_, x_, dtheta_)
        _, nn = tree.query(moved, k=1)
        return mesh_before.points[nn]

    def objective_at(u_, x_, dtheta_, alpha_):
        obj = JointObjective(
            kind, u_, pts if use_geometry else None,
            correspondences(u_, x_, dtheta_), hands,
            cfg.lambda_g, cfg.lambda_h, cfg.lambda_p, u0, x0, dtheta0,
        )
        val, _ = obj.value_and_grad(obj.pack(x_, dtheta_, alpha_))
        return val

    best = (u, x, dtheta, alpha)
    best_val = objective_at(u, x, dtheta, alpha)
    prev_val = best_val
    converged = False
    n_outer = 0
    for n_outer in range(1, cfg.max_outer + 1):
        obj = JointObjective(
            kind, u, pts if use_geometry else None,
            correspondences(u, x, dtheta), hands,
            cfg.lambda_g, cfg.lambda_h, cfg.lambda_p, u0, x0, dtheta0,
        )
        res = minimize(
            obj.value_and_grad,
            obj.pack(x, dtheta, alpha),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": cfg.max_inner},
        )
        u_new, x_new, dtheta_new, alpha_new = obj.state(res.x)
        if alpha_new is None:
            break
        u, x, dtheta, alpha = u_new, x_new, dtheta_new, alpha_new
        val = objective_at(u, x, dtheta, alpha)
        if val < best_val:
            best = (u, x, dtheta, alpha)
            best_val = val
        if abs(prev_val - val) < cfg.tol:
            converged = True
            break
        prev_val = val

    u, x, dtheta, alpha = best
    if dtheta < 0.0:  # canonical sign: nonnegative state at discovery
        u, dtheta = -u, -dtheta
    joint = JointModel(kind, u / np.linalg.norm(u), x)
    cost_g = _geometry_cost(pts, kind, joint.axis, x, dtheta, tree) if use_geometry else 0.0
    cost_h = _hand_cost(hands, alpha, kind, joint.axis, x, dtheta)
    cost_p = _prior_cost(kind, joint.axis, x, dtheta, u0, x0, dtheta0, cfg.lambda_p)
    return FitResult(
        joint=joint,
        dtheta=float(dtheta),
        alpha=alpha,
        part=part,
        cost_geometry=cost_g,
        cost_hand=cost_h,
        cost_prior=cost_p,
        objective=float(best_val),
        converged=converged,
        n_outer=n_outer,
    )


def _transform_points(pts, kind, u, x, amount):
    """Motion operator with beta = 1: articulate points back by `amount`."""
    if kind == PRISMATIC:
        return pts - amount * u
    rot = rotation_about_axis(u, -amount)
    return (pts - x) @ rot.T + x


def _geometry_cost(pts, kind, u, x, dtheta, tree) -> float:
    moved = _transform_points(pts, kind, u, x, dtheta)
    dists, _ = tree.query(moved, k=1)
    return float(np.mean(dists**2))


def _hand_cost(hands, alpha, kind, u, x, dtheta) -> float:
    if kind == PRISMATIC:
        moved = hands - np.outer(alpha * dtheta, u)
    else:
        moved = np.stack(
            [
                _transform_points(h[None, :], kind, u, x, a * dtheta)[0]
                for h, a in zip(hands, alpha)
            ]
        )
    return float(np.mean(np.sum((moved - hands[0]) ** 2, axis=1)))


def _prior_cost(kind, u, x, dtheta, u0, x0, dtheta0, lam_p) -> float:
    if kind == PRISMATIC:
        norm_a = float(np.linalg.norm(u - u0))
    else:
        norm_a = float(np.sqrt(np.sum((u - u0) ** 2) + np.sum((x - x0) ** 2)))
    return lam_p * (norm_a + abs(dtheta - dtheta0))
