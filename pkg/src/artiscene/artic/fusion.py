"""Static-interval geometry fusion and moving-part extraction.

The fused "mesh" is a voxel-downsampled accumulation of back-projected depth
over one static interval: a point cloud at the fusion cell resolution. Part
extraction flood-fills the after-interaction cloud from the hand position and
stops expanding wherever the before-interaction geometry is reached.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InsufficientGeometryError
from ..geom import CameraModel, PointCloud, RadiusHash, backproject

FUSION_CELL = 0.01
SEED_MAX_DIST = 0.5


def downsample(points: np.ndarray, cell: float) -> np.ndarray:
    """One representative (cell centroid) per occupied cell, deterministic order."""
    if points.shape[0] == 0:
        return points
    idx = np.floor(points / cell).astype(np.int64)
    uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
    sums = np.zeros((uniq.shape[0], 3))
    np.add.at(sums, inverse, points)
    counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
    return sums / counts[:, None]


def fuse_static(frames, camera: CameraModel, cell: float = FUSION_CELL) -> PointCloud:
    """Accumulate back-projected depth over a static interval into one cloud."""
    clouds = [backproject(f.depth, camera, f.camera_pose) for f in frames]
    clouds = [c.points for c in clouds if not c.is_empty]
    if not clouds:
        return PointCloud(np.zeros((0, 3)))
    return PointCloud(downsample(np.concatenate(clouds, axis=0), cell))


def extract_part(
    mesh_before: PointCloud,
    mesh_after: PointCloud,
    seed,
    match_radius: float = 2.0 * FUSION_CELL,
) -> PointCloud:
    """Connected component of mesh_after grown from the point nearest `seed`.

    Growth uses a fixed-radius neighbor graph; points lying within
    `match_radius` of mesh_before are kept but never expanded, so the fill
    stays on geometry that moved.
    """
    if mesh_after.is_empty or mesh_before.is_empty:
        raise InsufficientGeometryError("part extraction needs non-empty meshes")
    seed = np.asarray(seed, dtype=np.float64).reshape(3)
    d_seed = np.linalg.norm(mesh_after.points - seed, axis=1)
    start = int(np.argmin(d_seed))
    if d_seed[start] > SEED_MAX_DIST:
        raise InsufficientGeometryError(
            f"hand seed is {d_seed[start]:.2f} m from the fused geometry"
        )
    near_before = (
        cKDTree(mesh_before.points).query(mesh_after.points, k=1)[0] <= match_radius
    )
    graph = RadiusHash(mesh_after.points, match_radius)
    n = len(mesh_after)
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    queue = deque([start])
    member = []
    while queue:
        i = queue.popleft()
        member.append(i)
        if near_before[i]:
            continue
        for j in graph.indices_within(mesh_after.points[i]):
            if not visited[j]:
                visited[j] = True
                queue.append(int(j))
    member = np.sort(np.array(member, dtype=np.int64))
    return mesh_after.select(member)
