"""Metric depth from normalized disparity via per-frame scale/shift regression.

The model is depth = s / (disparity + s0). Fitting minimizes the L1 error
sum |s/(d + s0) - D| over masked pixels by iteratively reweighted least
squares: the residual is rewritten as (s - D*s0 - D*d) / (d + s0), linear in
(s, s0) for frozen denominators, and reweighted by 1/|r| each iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError

MIN_PIXELS = 16
SAMPLE_LIMIT = 2048
_IRLS_ITERS = 100
_IRLS_EPS = 1e-9


@dataclass(frozen=True)
class ScaleShift:
    s: float
    s0: float

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("scale must be positive")


def l1_objective(disparity, reference_depth, params: ScaleShift) -> float:
    d = np.asarray(disparity, float).ravel()
    ref = np.asarray(reference_depth, float).ravel()
    denom = d + params.s0
    good = denom > 0
    resid = np.abs(params.s / denom[good] - ref[good])
    # pixels with nonpositive denominators are unexplained; count them harshly
    return float(resid.sum()) + float(np.sum(~good)) * 1e6


def fit_scale_shift(disparity, reference_depth, mask) -> ScaleShift:
    """Regress (s, s0) against metric reference depth on the masked pixels."""
    disparity = np.asarray(disparity, dtype=np.float64)
    reference_depth = np.asarray(reference_depth, dtype=np.float64)
    d = disparity[mask].ravel()
    ref = reference_depth[mask].ravel()
    if d.size < MIN_PIXELS:
        raise ValueError(f"need at least {MIN_PIXELS} masked pixels, got {d.size}")
    if np.any(ref <= 0):
        raise ValueError("reference depths must be positive on the mask")
    if np.ptp(d) < 1e-12:
        raise RankDeficiencyError("constant disparity over the mask")
    if np.ptp(ref) < 1e-12:
        raise RankDeficiencyError("constant reference depth over the mask")

    # linear form: s - D*s0 = D*d  ->  least-squares init
    a_mat = np.column_stack([np.ones_like(ref), -ref])
    rhs = ref * d
    (s, s0), *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)

    for _ in range(_IRLS_ITERS):
        denom = d + s0
        denom = np.where(np.abs(denom) < _IRLS_EPS, np.sign(denom + 0.5) * _IRLS_EPS, denom)
        resid = (s - ref * s0 - ref * d) / denom
        w = 1.0 / (denom * denom * np.maximum(np.abs(resid), _IRLS_EPS))
        sw = np.sqrt(w)
        aw = a_mat * sw[:, None]
        bw = rhs * sw
        try:
            sol, *_ = np.linalg.lstsq(aw, bw, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError("weighted system became singular") from exc
        step = np.abs(sol - np.array([s, s0])).max()
        s, s0 = float(sol[0]), float(sol[1])
        if step < 1e-14:
            break
    if s <= 0:
        raise RankDeficiencyError("regression produced a nonpositive scale")
    return ScaleShift(s=s, s0=s0)


def apply_scale_shift(disparity, params: ScaleShift) -> np.ndarray:
    """Elementwise depth = s/(d + s0); nonpositive denominators map to 0 (invalid)."""
    disparity = np.asarray(disparity, dtype=np.float64)
    denom = disparity + params.s0
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = params.s / denom
    return np.where(denom > 0.0, depth, 0.0)


def background_mask(instance_map, background_ids) -> np.ndarray:
    """Pixels whose instance label is a static background primitive."""
    return np.isin(np.asarray(instance_map), sorted(background_ids))


def sample_mask(mask, rng: np.random.Generator, limit: int = SAMPLE_LIMIT) -> np.ndarray:
    """Down-sample a boolean mask to at most `limit` true pixels (seeded)."""
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask.ravel())
    if idx.size > limit:
        idx = rng.choice(idx, size=limit, replace=False)
    out = np.zeros(mask.size, dtype=bool)
    out[idx] = True
    return out.reshape(mask.shape)
