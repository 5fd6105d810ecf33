"""Geometry primitives: point clouds, rigid poses, voxel grids, convex hulls,
ray occlusion tests, and radius queries.

Conventions used across the package:

* optical frame is z-forward, x-right, y-down; poses are camera-to-world
* depth images store camera-frame z in meters; 0 or NaN marks invalid pixels
* world units are meters
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull as _QhullConvexHull
from scipy.spatial import QhullError

from . import kernels
from .errors import InsufficientGeometryError

# Inflation applied to coplanar/collinear clouds so conv() always has volume.
DEGENERATE_HULL_EPS = 0.01

_ORTHO_TOL = 1e-9


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Pose:
    """Rigid transform with orthonormal rotation (det +1) and translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        tra = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)
        if not np.all(np.isfinite(rot)) or not np.all(np.isfinite(tra)):
            raise ValueError("pose has non-finite entries")
        err = np.abs(rot @ rot.T - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (error {err:.2e})")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("rotation has determinant -1")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, mat) -> "Pose":
        mat = np.asarray(mat, dtype=np.float64).reshape(4, 4)
        return cls(mat[:3, :3], mat[:3, 3])

    def matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    def transform(self, points) -> np.ndarray:
        pts = _as_points(points)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "Pose":
        rot_inv = self.rotation.T
        return Pose(rot_inv, -rot_inv @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self * other)(p) = self(other(p))."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics; pixel (row, col) has image coordinates (col, row)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")

    @cached_property
    def _pixel_rays(self) -> np.ndarray:
        """(H*W, 3) camera-frame ray directions with z = 1, row-major."""
        cols = np.arange(self.width, dtype=np.float64)
        rows = np.arange(self.height, dtype=np.float64)
        xn = (cols - self.cx) / self.fx
        yn = (rows - self.cy) / self.fy
        xg, yg = np.meshgrid(xn, yn)
        return np.stack([xg.ravel(), yg.ravel(), np.ones(xg.size)], axis=1)

    def project(self, points_world, pose: Pose):
        """World points -> (u, v, z) in the image of a camera at `pose`."""
        p_cam = pose.inverse().transform(points_world)
        z = p_cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * p_cam[:, 0] / z + self.cx
            v = self.fy * p_cam[:, 1] / z + self.cy
        return u, v, z


@dataclass(frozen=True)
class PointCloud:
    """World-frame points with optional per-point instance ids."""

    points: np.ndarray
    instance_ids: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_points(self.points) if np.size(self.points) else np.zeros((0, 3))
        object.__setattr__(self, "points", pts)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud has non-finite coordinates")
        if self.instance_ids is not None:
            ids = np.asarray(self.instance_ids, dtype=np.int64).reshape(-1)
            if ids.shape[0] != pts.shape[0]:
                raise ValueError("instance_ids must cover all points")
            object.__setattr__(self, "instance_ids", ids)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    def centroid(self) -> np.ndarray:
        if self.is_empty:
            raise InsufficientGeometryError("centroid of empty cloud")
        return self.points.mean(axis=0)

    def select(self, mask) -> "PointCloud":
        ids = None if self.instance_ids is None else self.instance_ids[mask]
        return PointCloud(self.points[mask], ids)

    def transformed(self, pose: Pose) -> "PointCloud":
        return PointCloud(pose.transform(self.points), self.instance_ids)

    @staticmethod
    def concatenate(clouds) -> "PointCloud":
        clouds = [c for c in clouds if not c.is_empty]
        if not clouds:
            return PointCloud(np.zeros((0, 3)))
        pts = np.concatenate([c.points for c in clouds], axis=0)
        if all(c.instance_ids is not None for c in clouds):
            ids = np.concatenate([c.instance_ids for c in clouds])
        else:
            ids = None
        return PointCloud(pts, ids)


@dataclass(frozen=True)
class VoxelGrid:
    """Sparse occupancy grid; each occupied cell carries an instance-id set."""

    origin: np.ndarray
    voxel_size: float
    occupied: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))

    def __len__(self) -> int:
        return len(self.occupied)

    def cell_of(self, point) -> tuple:
        idx = kernels.voxel_indices(_as_points(point), self.origin, self.voxel_size)[0]
        return (int(idx[0]), int(idx[1]), int(idx[2]))

    def centers(self) -> np.ndarray:
        """World-space centers of all occupied cells, lexicographically sorted."""
        if not self.occupied:
            return np.zeros((0, 3))
        idx = np.array(sorted(self.occupied.keys()), dtype=np.float64)
        return self.origin + (idx + 0.5) * self.voxel_size


class RadiusHash:
    """Uniform spatial hash for exact fixed-radius queries on one cloud.

    Cell size equals the query radius, so a query touches at most 27 cells.
    """

    def __init__(self, points, radius: float):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.points = _as_points(points)
        self.radius = float(radius)
        self._cells: dict[tuple, list] = {}
        idx = kernels.voxel_indices(self.points, np.zeros(3), self.radius)
        for row, key in enumerate(map(tuple, idx.tolist())):
            self._cells.setdefault(key, []).append(row)

    def _candidates(self, center) -> np.ndarray:
        ci = np.floor(np.asarray(center, dtype=np.float64) / self.radius).astype(np.int64)
        rows: list = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for dk in (-1, 0, 1):
                    rows.extend(self._cells.get((ci[0] + di, ci[1] + dj, ci[2] + dk), ()))
        return np.array(rows, dtype=np.int64)

    def count(self, center) -> int:
        rows = self._candidates(center)
        if rows.size == 0:
            return 0
        return kernels.count_in_ball(self.points[rows], np.asarray(center, float), self.radius)

    def indices_within(self, center) -> np.ndarray:
        rows = self._candidates(center)
        if rows.size == 0:
            return rows
        d2 = np.sum((self.points[rows] - np.asarray(center, float)) ** 2, axis=1)
        return rows[d2 <= self.radius * self.radius]


@dataclass(frozen=True)
class ConvexHullMesh:
    """Watertight convex hull: vertices plus outward-oriented triangles.

    `normals` and `offsets` give the face half-spaces (n . x <= b inside).
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        return kernels.halfspace_inside(_as_points(points), self.normals, self.offsets, tol)

    def volume(self) -> float:
        # signed tetrahedra against the centroid of the vertices
        c = self.vertices.mean(axis=0)
        a = self.vertices[self.faces[:, 0]] - c
        b = self.vertices[self.faces[:, 1]] - c
        d = self.vertices[self.faces[:, 2]] - c
        return float(np.abs(np.einsum("ij,ij->i", np.cross(a, b), d)).sum() / 6.0)


def backproject(depth, camera: CameraModel, pose: Pose, instance_map=None) -> PointCloud:
    """Lift a depth image to a world-frame point cloud, one point per valid pixel.

    Pixels with depth 0, negative, or NaN are skipped. When `instance_map` is
    given, per-point instance ids are attached.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (camera.height, camera.width):
        raise ValueError(f"depth shape {depth.shape} does not match camera")
    flat = depth.ravel()
    valid = np.isfinite(flat) & (flat > 0.0)
    if not valid.any():
        return PointCloud(np.zeros((0, 3)))
    rays = camera._pixel_rays[valid]
    p_cam = rays * flat[valid, None]
    pts = pose.transform(p_cam)
    ids = None
    if instance_map is not None:
        ids = np.asarray(instance_map).ravel()[valid].astype(np.int64)
    return PointCloud(pts, ids)


def ball_count(cloud: PointCloud, center, radius: float) -> int:
    """Exact number of cloud points within `radius` of `center`."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if cloud.is_empty:
        return 0
    return RadiusHash(cloud.points, radius).count(center)


def convex_hull(cloud: PointCloud) -> ConvexHullMesh:
    """Convex hull of a cloud, inflating degenerate (coplanar/collinear) inputs.

    Clouds whose principal-axis spread is (near) zero along one or more axes
    are padded with +-DEGENERATE_HULL_EPS copies along those axes before
    hulling, so thin parts still produce a volume for occlusion tests.
    """
    pts = cloud.points
    if pts.shape[0] < 4:
        raise InsufficientGeometryError(f"convex hull needs >= 4 points, got {pts.shape[0]}")
    work = pts
    try:
        hull = _QhullConvexHull(work)
    except QhullError:
        work = _inflate_degenerate(pts)
        try:
            hull = _QhullConvexHull(work)
        except QhullError as exc:
            raise InsufficientGeometryError("degenerate cloud cannot be hulled") from exc
    return _hull_mesh(hull, work)


def _inflate_degenerate(pts: np.ndarray) -> np.ndarray:
    centered = pts - pts.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=True)
    svals = np.concatenate([svals, np.zeros(3 - svals.shape[0])])
    flat_axes = [vt[k] for k in range(3) if svals[k] < 1e-9 * max(1.0, svals[0])]
    if not flat_axes:
        # rank is fine but Qhull still failed (e.g. near-degenerate); nudge anyway
        flat_axes = [vt[2]]
    out = [pts]
    for axis in flat_axes:
        out.append(pts + DEGENERATE_HULL_EPS * axis)
        out.append(pts - DEGENERATE_HULL_EPS * axis)
    return np.concatenate(out, axis=0)


def _hull_mesh(hull: _QhullConvexHull, pts: np.ndarray) -> ConvexHullMesh:
    vert_rows = hull.vertices
    remap = np.full(pts.shape[0], -1, dtype=np.int64)
    remap[vert_rows] = np.arange(vert_rows.shape[0])
    faces = remap[hull.simplices]
    normals = hull.equations[:, :3].copy()
    offsets = -hull.equations[:, 3].copy()
    vertices = pts[vert_rows]
    # orient each triangle so its geometric normal matches the face equation
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    tri_n = np.cross(b - a, c - a)
    flip = np.einsum("ij,ij->i", tri_n, normals) < 0.0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return ConvexHullMesh(vertices, faces, normals, offsets)


def ray_occluded_by_hull(point, camera_center, hull: ConvexHullMesh) -> bool:
    """True when the ray from the camera through the point crosses the hull
    interior, i.e. the point lies along an occluded viewing ray (in front of,
    inside, or behind the hull along that ray)."""
    return bool(rays_occluded_by_hull(_as_points(point), camera_center, hull)[0])


def rays_occluded_by_hull(points, camera_center, hull: ConvexHullMesh) -> np.ndarray:
    """Vectorized `ray_occluded_by_hull` for many points, one camera."""
    pts = _as_points(points)
    center = np.asarray(camera_center, dtype=np.float64).reshape(3)
    dirs = pts - center
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("point coincides with camera center")
    origins = np.broadcast_to(center, pts.shape)
    tlo, thi = kernels.ray_convex_interval(origins, dirs, hull.normals, hull.offsets)
    return thi > np.maximum(tlo, 0.0)


def hull_overlap_fraction(cloud: PointCloud, hull: ConvexHullMesh, tol: float = 1e-9) -> float:
    """Fraction of cloud points inside or on the hull."""
    if cloud.is_empty:
        raise InsufficientGeometryError("overlap fraction of empty cloud")
    inside = hull.contains(cloud.points, tol)
    return float(np.count_nonzero(inside)) / float(len(cloud))


def voxelize(cloud: PointCloud, grid: VoxelGrid) -> VoxelGrid:
    """Mark every point's cell occupied, unioning instance ids per cell.

    Returns a new grid; the input grid is unchanged.
    """
    occupied = {k: set(v) for k, v in grid.occupied.items()}
    if not cloud.is_empty:
        idx = kernels.voxel_indices(cloud.points, grid.origin, grid.voxel_size)
        ids = cloud.instance_ids
        for row, key in enumerate(map(tuple, idx.tolist())):
            cell = occupied.setdefault(key, set())
            if ids is not None:
                cell.add(int(ids[row]))
    return VoxelGrid(grid.origin, grid.voxel_size, occupied)
