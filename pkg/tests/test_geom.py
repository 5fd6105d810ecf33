"""Geometry primitives against the spec examples and independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artiscene.errors import InsufficientGeometryError
from artiscene.geom import (
    CameraModel,
    ConvexHullMesh,
    PointCloud,
    Pose,
    RadiusHash,
    VoxelGrid,
    backproject,
    ball_count,
    convex_hull,
    hull_overlap_fraction,
    ray_occluded_by_hull,
    rays_occluded_by_hull,
    voxelize,
)

RNG = np.random.default_rng(7)


def random_rotation(rng):
    q = rng.normal(0, 1, 4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


class TestPose:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.001, np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_inverse_compose_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p = Pose(random_rotation(rng), rng.normal(0, 2, 3))
            pts = rng.normal(0, 1, (10, 3))
            back = p.inverse().transform(p.transform(pts))
            assert np.allclose(back, pts, atol=1e-12)


class TestBackproject:
    def test_center_pixel_identity(self, camera):
        depth = np.zeros((64, 64))
        depth[31, 31] = 1.0  # pixel at (u, v) = (31.5, 31.5)? no: (31, 31)
        cam = CameraModel(fx=48.0, fy=48.0, cx=31.0, cy=31.0, width=64, height=64)
        cloud = backproject(depth, cam, Pose.identity())
        assert len(cloud) == 1
        assert np.allclose(cloud.points[0], [0.0, 0.0, 1.0], atol=1e-12)

    def test_translated_pose(self):
        depth = np.zeros((64, 64))
        depth[31, 31] = 1.0
        cam = CameraModel(fx=48.0, fy=48.0, cx=31.0, cy=31.0, width=64, height=64)
        pose = Pose(np.eye(3), np.array([2.0, 0.0, 0.0]))
        cloud = backproject(depth, cam, pose)
        assert np.allclose(cloud.points[0], [2.0, 0.0, 1.0], atol=1e-12)

    def test_all_invalid_gives_empty(self, camera):
        depth = np.zeros((64, 64))
        depth[3, 4] = np.nan
        cloud = backproject(depth, camera, Pose.identity())
        assert cloud.is_empty

    def test_project_backproject_identity(self, camera):
        rng = np.random.default_rng(5)
        pose = Pose(random_rotation(rng), rng.normal(0, 1, 3))
        depth = rng.uniform(0.5, 4.0, (64, 64))
        cloud = backproject(depth, camera, pose)
        u, v, z = camera.project(cloud.points, pose)
        cols, rows = np.meshgrid(np.arange(64), np.arange(64))
        assert np.allclose(u, cols.ravel(), atol=1e-6)
        assert np.allclose(v, rows.ravel(), atol=1e-6)
        assert np.allclose(z, depth.ravel(), atol=1e-6)

    def test_instance_ids_attached(self, camera):
        depth = np.ones((64, 64))
        inst = np.arange(64 * 64).reshape(64, 64)
        cloud = backproject(depth, camera, Pose.identity(), instance_map=inst)
        assert np.array_equal(cloud.instance_ids, inst.ravel())


class TestBallCount:
    def test_single_point_inside(self):
        cloud = PointCloud(np.array([[0.0, 0.0, 0.0]]))
        assert ball_count(cloud, [0, 0, 0], 0.1) == 1

    def test_single_point_outside(self):
        cloud = PointCloud(np.array([[1.0, 0.0, 0.0]]))
        assert ball_count(cloud, [0, 0, 0], 0.5) == 0

    def test_matches_linear_scan(self):
        pts = RNG.uniform(0, 1, (10000, 3))
        cloud = PointCloud(pts)
        center = [0.3, 0.6, 0.5]
        want = int(np.sum(np.linalg.norm(pts - np.array(center), axis=1) <= 0.2))
        assert ball_count(cloud, center, 0.2) == want

    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.5), st.floats(0.05, 0.5))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_radius(self, seed, r1, r2):
        rng = np.random.default_rng(seed)
        cloud = PointCloud(rng.uniform(-1, 1, (300, 3)))
        lo, hi = sorted([r1, r2])
        assert ball_count(cloud, [0, 0, 0], lo) <= ball_count(cloud, [0, 0, 0], hi)

    def test_radius_hash_indices(self):
        pts = RNG.uniform(-1, 1, (2000, 3))
        h = RadiusHash(pts, 0.25)
        idx = h.indices_within([0.1, -0.2, 0.3])
        want = np.where(np.linalg.norm(pts - np.array([0.1, -0.2, 0.3]), axis=1) <= 0.25)[0]
        assert np.array_equal(np.sort(idx), want)


def cube_cloud():
    corners = np.array(
        [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)]
    )
    return PointCloud(corners)


def oracle_contains(hull: ConvexHullMesh, points, tol=1e-6):
    """Face planes recomputed from triangle vertices, independent of Qhull equations."""
    a = hull.vertices[hull.faces[:, 0]]
    b = hull.vertices[hull.faces[:, 1]]
    c = hull.vertices[hull.faces[:, 2]]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    d = np.einsum("ij,ij->i", n, a)
    return np.all(points @ n.T <= d[None, :] + tol, axis=1)


class TestConvexHull:
    def test_cube_corners(self):
        hull = convex_hull(cube_cloud())
        assert hull.vertices.shape[0] == 8
        assert hull.volume() == pytest.approx(1.0, abs=1e-9)

    def test_interior_points_ignored(self):
        pts = np.vstack([cube_cloud().points, RNG.uniform(-0.4, 0.4, (50, 3))])
        hull = convex_hull(PointCloud(pts))
        assert hull.vertices.shape[0] == 8
        assert hull.volume() == pytest.approx(1.0, abs=1e-9)

    def test_random_points_all_contained(self):
        pts = RNG.normal(0, 1, (200, 3))
        hull = convex_hull(PointCloud(pts))
        assert oracle_contains(hull, pts).all()
        assert hull.contains(pts, tol=1e-6).all()

    def test_too_few_points(self):
        with pytest.raises(InsufficientGeometryError):
            convex_hull(PointCloud(np.zeros((3, 3))))

    def test_planar_cloud_inflated(self):
        pts = RNG.uniform(-1, 1, (30, 3))
        pts[:, 2] = 0.2  # coplanar
        hull = convex_hull(PointCloud(pts))
        assert hull.volume() > 0.0
        assert hull.contains(pts, tol=1e-6).all()

    def test_collinear_cloud_inflated(self):
        t = np.linspace(0, 1, 10)
        pts = np.outer(t, [1.0, 2.0, 0.5])
        hull = convex_hull(PointCloud(pts))
        assert hull.volume() > 0.0
        assert hull.contains(pts, tol=1e-6).all()

    def test_watertight(self):
        hull = convex_hull(PointCloud(RNG.normal(0, 1, (50, 3))))
        edges = {}
        for tri in hull.faces:
            for e in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]:
                edges[e] = edges.get(e, 0) + 1
        # each directed edge appears once and its reverse exactly once
        for (i, j), cnt in edges.items():
            assert cnt == 1
            assert edges.get((j, i), 0) == 1


def moller_trumbore_hit(orig, d, tri, t_lo, t_hi, eps=1e-12):
    v0, v1, v2 = tri
    e1, e2 = v1 - v0, v2 - v0
    h = np.cross(d, e2)
    a = np.dot(e1, h)
    if abs(a) < eps:
        return False
    f = 1.0 / a
    s = orig - v0
    u = f * np.dot(s, h)
    if u < -eps or u > 1 + eps:
        return False
    q = np.cross(s, e1)
    v = f * np.dot(d, q)
    if v < -eps or u + v > 1 + eps:
        return False
    t = f * np.dot(e2, q)
    return t_lo <= t <= t_hi


class TestRayOcclusion:
    def setup_method(self):
        self.hull = convex_hull(cube_cloud())
        self.cam = np.array([0.0, 0.0, -5.0])

    def test_point_behind_hull(self):
        assert ray_occluded_by_hull([0.0, 0.0, 3.0], self.cam, self.hull)

    def test_ray_misses(self):
        assert not ray_occluded_by_hull([3.0, 0.0, 0.0], self.cam, self.hull)

    def test_point_inside_hull(self):
        assert ray_occluded_by_hull([0.1, 0.0, 0.0], self.cam, self.hull)

    def test_matches_triangle_oracle(self):
        rng = np.random.default_rng(11)
        hull = convex_hull(PointCloud(rng.normal(0, 0.5, (40, 3))))
        cam = np.array([2.5, 2.5, 2.5])
        pts = rng.uniform(-2, 2, (1000, 3))
        got = rays_occluded_by_hull(pts, cam, hull)
        tris = hull.vertices[hull.faces]
        for i in range(1000):
            d = pts[i] - cam
            # occluded iff the full ray (t > 0) crosses any hull face
            want = any(moller_trumbore_hit(cam, d, tri, 1e-9, np.inf) for tri in tris)
            assert got[i] == want, f"mismatch at point {i}"

    def test_rigid_invariance(self):
        rng = np.random.default_rng(13)
        pts = rng.normal(0, 1, (30, 3))
        hull_pts = rng.normal(0, 0.5, (25, 3))
        cam = np.array([3.0, 0.0, 0.0])
        base = rays_occluded_by_hull(pts, cam, convex_hull(PointCloud(hull_pts)))
        for _ in range(5):
            pose = Pose(random_rotation(rng), rng.normal(0, 2, 3))
            moved = rays_occluded_by_hull(
                pose.transform(pts),
                pose.transform(cam[None, :])[0],
                convex_hull(PointCloud(pose.transform(hull_pts))),
            )
            assert np.array_equal(base, moved)


class TestHullOverlap:
    def test_fully_inside(self):
        hull = convex_hull(cube_cloud())
        cloud = PointCloud(RNG.uniform(-0.45, 0.45, (100, 3)))
        assert hull_overlap_fraction(cloud, hull) == 1.0

    def test_fully_outside(self):
        hull = convex_hull(cube_cloud())
        cloud = PointCloud(RNG.uniform(2.0, 3.0, (100, 3)))
        assert hull_overlap_fraction(cloud, hull) == 0.0

    def test_half_split_matches_oracle(self):
        hull = convex_hull(cube_cloud())
        inside = RNG.uniform(-0.4, 0.4, (60, 3))
        outside = RNG.uniform(1.0, 2.0, (40, 3))
        cloud = PointCloud(np.vstack([inside, outside]))
        frac = hull_overlap_fraction(cloud, hull)
        want = oracle_contains(hull, cloud.points).mean()
        assert frac == pytest.approx(want)
        assert frac == pytest.approx(0.6)


class TestVoxelize:
    def test_single_point(self):
        grid = VoxelGrid(np.zeros(3), 0.1)
        out = voxelize(PointCloud(np.array([[0.05, 0.05, 0.05]]), np.array([7])), grid)
        assert set(out.occupied) == {(0, 0, 0)}
        assert out.occupied[(0, 0, 0)] == {7}

    def test_same_cell_merges_ids(self):
        grid = VoxelGrid(np.zeros(3), 0.1)
        cloud = PointCloud(np.array([[0.01, 0.01, 0.01], [0.09, 0.09, 0.09]]), np.array([1, 2]))
        out = voxelize(cloud, grid)
        assert out.occupied[(0, 0, 0)] == {1, 2}

    def test_floor_division_oracle(self):
        pts = RNG.uniform(-2, 2, (10000, 3))
        grid = VoxelGrid(np.array([0.5, -0.5, 0.0]), 0.07)
        out = voxelize(PointCloud(pts), grid)
        want = set(map(tuple, np.floor((pts - grid.origin) / 0.07).astype(int).tolist()))
        assert set(out.occupied) == want

    def test_idempotent(self):
        pts = RNG.uniform(-1, 1, (500, 3))
        grid = VoxelGrid(np.zeros(3), 0.05)
        once = voxelize(PointCloud(pts), grid)
        twice = voxelize(PointCloud(pts), once)
        assert set(once.occupied) == set(twice.occupied)

    def test_input_grid_unchanged(self):
        grid = VoxelGrid(np.zeros(3), 0.1)
        voxelize(PointCloud(np.array([[0.0, 0.0, 0.0]])), grid)
        assert len(grid) == 0
