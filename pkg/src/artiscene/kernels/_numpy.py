"""Pure-numpy implementations of the hot kernels.

Reference semantics for the compiled backend: `_native.pyx` mirrors the
arithmetic here operation for operation so both backends return identical
results on identical inputs.
"""

import numpy as np


def ray_aabb(origins, dirs, bmin, bmax):
    """Nearest nonnegative hit parameter of rays against one axis-aligned box.

    Rays are ``p = origin + t * dir`` with unnormalized directions. Returns an
    array of t values, ``inf`` where the ray misses (or the box lies behind
    the origin). Zero-thickness boxes and axis-parallel rays are handled.
    """
    n = origins.shape[0]
    tlo = np.full(n, -np.inf)
    thi = np.full(n, np.inf)
    ok = np.ones(n, dtype=bool)
    for k in range(3):
        o = origins[:, k]
        d = dirs[:, k]
        par = d == 0.0
        ok &= ~par | ((o >= bmin[k]) & (o <= bmax[k]))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (bmin[k] - o) / d
            t2 = (bmax[k] - o) / d
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        tlo = np.where(par, tlo, np.maximum(tlo, lo))
        thi = np.where(par, thi, np.minimum(thi, hi))
    t = np.where(tlo >= 0.0, tlo, thi)
    miss = ~ok | (thi < tlo) | (thi < 0.0)
    return np.where(miss, np.inf, t)


def count_in_ball(points, center, radius):
    """Exact count of points with ||p - center|| <= radius."""
    dx = points[:, 0] - center[0]
    dy = points[:, 1] - center[1]
    dz = points[:, 2] - center[2]
    return int(np.count_nonzero(dx * dx + dy * dy + dz * dz <= radius * radius))


def halfspace_inside(points, normals, offsets, tol):
    """Boolean mask: point satisfies every n . p <= b + tol."""
    inside = np.ones(points.shape[0], dtype=bool)
    for f in range(normals.shape[0]):
        dot = (
            points[:, 0] * normals[f, 0]
            + points[:, 1] * normals[f, 1]
            + points[:, 2] * normals[f, 2]
        )
        inside &= dot <= offsets[f] + tol
    return inside


def ray_convex_interval(origins, dirs, normals, offsets):
    """Clip rays against a convex polytope given as n . x <= b.

    Returns (t_enter, t_exit) per ray; an empty intersection is encoded as
    t_enter > t_exit.
    """
    n = origins.shape[0]
    tlo = np.full(n, -np.inf)
    thi = np.full(n, np.inf)
    for f in range(normals.shape[0]):
        num = offsets[f] - (
            origins[:, 0] * normals[f, 0]
            + origins[:, 1] * normals[f, 1]
            + origins[:, 2] * normals[f, 2]
        )
        den = (
            dirs[:, 0] * normals[f, 0]
            + dirs[:, 1] * normals[f, 1]
            + dirs[:, 2] * normals[f, 2]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = num / den
        tlo = np.where(den < 0.0, np.maximum(tlo, tt), tlo)
        thi = np.where(den > 0.0, np.minimum(thi, tt), thi)
        # ray parallel to a violated face: no intersection at all
        thi = np.where((den == 0.0) & (num < 0.0), -np.inf, thi)
    return tlo, thi


def voxel_indices(points, origin, size):
    """Integer cell index per point: floor((p - origin) / size)."""
    return np.floor((points - origin[None, :]) / size).astype(np.int64)
