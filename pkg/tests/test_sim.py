"""Simulator: render oracles, hand kinematics, dataset round trips."""

import numpy as np
import pytest

from artiscene.errors import DatasetError, SceneSpecError
from artiscene.geom import CameraModel, backproject
from artiscene.sim import read_dataset, render_frame, simulate, write_dataset
from artiscene.sim.scene import scene_from_dict, script_from_dict
from artiscene.sim.simulate import part_states_at

from conftest import box_surface_distance, drawer_scene_dict, drawer_script_dict


def scene_surface_distance(scene, states, points):
    """Distance from points to the nearest entity surface at the given states."""
    from artiscene.sim.render import entity_pose

    best = np.full(len(points), np.inf)
    for e in (*scene.statics, *scene.parts, *scene.items):
        pose = entity_pose(scene, e.id, states)
        pts = points if pose is None else pose.inverse().transform(points)
        best = np.minimum(best, box_surface_distance(pts, e.box.lo, e.box.hi))
    return best


class TestRender:
    def test_empty_scene_all_zero(self, camera):
        scene = scene_from_dict({"name": "empty", "statics": []})
        depth, inst = render_frame(scene, {}, _pose_at([-1, 0, 1], [1, 0, 1]), camera)
        assert not depth.any()
        assert not inst.any()

    def test_plane_two_meters_ahead(self):
        cam = CameraModel(fx=48.0, fy=48.0, cx=31.0, cy=31.0, width=64, height=64)
        scene = scene_from_dict(
            {
                "name": "plane",
                "statics": [
                    {
                        "id": 1,
                        "label": "wall",
                        "plane": {"axis": "x", "offset": 2.0, "extent": [[-3, -3], [3, 3]]},
                    }
                ],
            }
        )
        pose = _pose_at([0, 0, 0], [2, 0, 0])
        depth, inst = render_frame(scene, {}, pose, cam)
        assert depth[31, 31] == pytest.approx(2.0, abs=1e-12)
        assert inst[31, 31] == 1

    def test_open_drawer_matches_translated_box(self, drawer_scene, camera):
        states = {10: 0.3}
        pose = _pose_at([-1.4, 0.0, 1.0], [0.4, 0.0, 0.35])
        depth, inst = render_frame(drawer_scene, states, pose, camera)
        cloud = backproject(depth.astype(np.float32), camera, pose, instance_map=inst)
        drawer_pts = cloud.points[cloud.instance_ids == 10]
        assert len(drawer_pts) > 50
        part = drawer_scene.part(10)
        shift = 0.3 * np.array([-1.0, 0.0, 0.0])
        dist = box_surface_distance(drawer_pts - shift, part.box.lo, part.box.hi)
        assert dist.max() < 1e-6

    def test_rendered_points_on_scene_surfaces(self, drawer_scene, camera):
        states = {10: 0.22}
        pose = _pose_at([-1.3, 0.4, 1.2], [0.5, 0.0, 0.3])
        depth, inst = render_frame(drawer_scene, states, pose, camera)
        cloud = backproject(depth.astype(np.float32), camera, pose)
        dist = scene_surface_distance(drawer_scene, states, cloud.points)
        assert dist.max() < 1e-6

    def test_instance_ids_exist(self, drawer_scene, camera):
        depth, inst = render_frame(
            drawer_scene, {10: 0.0}, _pose_at([-1.5, 0, 1.0], [0.5, 0, 0.4]), camera
        )
        known = {0, 1, 2, 3, 10, 20}
        assert set(np.unique(inst)) <= known

    def test_missing_state_raises(self, drawer_scene, camera):
        with pytest.raises(ValueError):
            render_frame(drawer_scene, {}, _pose_at([-1, 0, 1], [1, 0, 0]), camera)


def _pose_at(eye, target):
    from artiscene.sim.simulate import look_at_pose

    return look_at_pose(np.array(eye, float), np.array(target, float))


class TestSimulate:
    def test_noiseless_hand_on_handle_trajectory(self, drawer_scene, drawer_script, camera):
        frames, gt = simulate(
            drawer_scene, drawer_script, camera, rate=10.0, hand_noise_sigma=0.0, seed=1
        )
        handle_center = drawer_scene.handle_of(10).box.center
        ev = drawer_script.events[0]
        for f in frames:
            if ev.start <= f.timestamp <= ev.end:
                s = gt.state_at(10, f.timestamp)
                expect = handle_center + s * np.array([-1.0, 0.0, 0.0])
                assert np.allclose(f.hand, expect, atol=1e-12)

    def test_prismatic_displacement_inner_product(self, drawer_scene, drawer_script, camera):
        frames, _ = simulate(
            drawer_scene, drawer_script, camera, rate=10.0, hand_noise_sigma=0.0, seed=1
        )
        ev = drawer_script.events[0]
        hs = [f.hand for f in frames if ev.start <= f.timestamp <= ev.end]
        disp = hs[-1] - hs[0]
        assert np.dot(disp, np.array([-1.0, 0.0, 0.0])) == pytest.approx(0.35, abs=1e-9)

    def test_revolute_hand_coplanar_equidistant(self, camera):
        scene = scene_from_dict(_door_scene_dict())
        script = script_from_dict(_door_script_dict())
        frames, gt = simulate(scene, script, camera, rate=10.0, hand_noise_sigma=0.0, seed=0)
        ev = script.events[0]
        hands = np.array([f.hand for f in frames if ev.start <= f.timestamp <= ev.end])
        joint = gt.joints[10]
        rel = hands - joint["pivot"]
        axial = rel @ joint["axis"]
        assert np.ptp(axial) < 1e-12  # coplanar (constant height along axis)
        radial = np.linalg.norm(rel - np.outer(axial, joint["axis"]), axis=1)
        assert np.ptp(radial) < 1e-12  # equidistant from the pivot axis

    def test_same_seed_identical(self, drawer_scene, drawer_script, camera):
        a, _ = simulate(drawer_scene, drawer_script, camera, rate=5.0, seed=42)
        b, _ = simulate(drawer_scene, drawer_script, camera, rate=5.0, seed=42)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.depth, fb.depth)
            assert np.array_equal(fa.instance_map, fb.instance_map)
            assert np.array_equal(fa.hand, fb.hand)
            assert np.array_equal(fa.camera_pose.matrix(), fb.camera_pose.matrix())

    def test_unknown_part_in_script(self, drawer_scene, camera):
        bad = drawer_script_dict()
        bad["events"][0]["part"] = 99
        with pytest.raises(SceneSpecError):
            simulate(drawer_scene, script_from_dict(bad), camera)

    def test_state_limit_enforced(self, drawer_scene, camera):
        bad = drawer_script_dict(delta=0.8)  # max_state is 0.5
        with pytest.raises(SceneSpecError):
            simulate(drawer_scene, script_from_dict(bad), camera)


def _door_scene_dict():
    return {
        "name": "micro_door",
        "statics": [
            {"id": 1, "label": "floor", "box": [[-3, -3, -0.02], [3, 3, 0]], "background": True},
            {"id": 2, "label": "closet", "box": [[0.8, -0.5, 0], [1.4, 0.5, 1.8]]},
        ],
        "parts": [
            {
                "id": 10,
                "label": "closet_door",
                "box": [[0.74, -0.48, 0.02], [0.8, 0.48, 1.78]],
                "joint": {"kind": "revolute", "axis": [0, 0, 1], "pivot": [0.77, -0.48, 0.0]},
                "max_state": 2.2,
            }
        ],
        "items": [
            {
                "id": 20,
                "label": "door_handle",
                "box": [[0.70, 0.30, 0.85], [0.74, 0.38, 0.95]],
                "parent": 10,
                "relation": "constrains",
                "handle": True,
            }
        ],
    }


def _door_script_dict():
    return {
        "duration": 14.0,
        "camera": [{"t": 0.0, "pos": [-1.0, 0.3, 1.4], "look_at": [0.8, 0.1, 0.9]}],
        "events": [{"part": 10, "start": 5.0, "end": 8.0, "delta": 1.2}],
    }


class TestDataset:
    def test_round_trip(self, drawer_scene, drawer_script, camera, tmp_path):
        frames, gt = simulate(
            drawer_scene, drawer_script, camera, rate=5.0, seed=3,
            disparity_params=(2.0, 0.1),
        )
        write_dataset(tmp_path, frames, camera, 5.0, drawer_scene, gt)
        ds = read_dataset(tmp_path)
        assert len(ds.frames) == len(frames)
        for orig, back in zip(frames, ds.frames):
            assert back.timestamp == orig.timestamp
            assert np.array_equal(back.hand, orig.hand)
            assert np.array_equal(back.depth, orig.depth)
            assert np.array_equal(back.instance_map, orig.instance_map)
            assert np.array_equal(back.disparity, orig.disparity)
            assert np.array_equal(back.camera_pose.matrix(), orig.camera_pose.matrix())
        assert ds.gt is not None
        assert np.allclose(ds.gt.mesh_points, gt.mesh_points.astype(np.float32))
        assert ds.gt.joints[10]["kind"] == "prismatic"
        assert set(ds.instances) == {1, 2, 3, 10, 20}

    def test_missing_depth_file_named(self, drawer_scene, drawer_script, camera, tmp_path):
        frames, gt = simulate(drawer_scene, drawer_script, camera, rate=2.0, seed=0)
        write_dataset(tmp_path, frames, camera, 2.0, drawer_scene, gt)
        (tmp_path / "depth" / "000003.bin").unlink()
        with pytest.raises(DatasetError, match="000003"):
            read_dataset(tmp_path)

    def test_truncated_depth_named(self, drawer_scene, drawer_script, camera, tmp_path):
        frames, gt = simulate(drawer_scene, drawer_script, camera, rate=2.0, seed=0)
        write_dataset(tmp_path, frames, camera, 2.0, drawer_scene, gt)
        target = tmp_path / "depth" / "000002.bin"
        target.write_bytes(target.read_bytes()[:100])
        with pytest.raises(DatasetError, match="000002.*truncated"):
            read_dataset(tmp_path)

    def test_states_ground_truth(self, drawer_scene, drawer_script, camera):
        frames, gt = simulate(drawer_scene, drawer_script, camera, rate=10.0, seed=0)
        ev = drawer_script.events[0]
        assert gt.state_at(10, ev.start - 0.5) == 0.0
        assert gt.state_at(10, ev.end + 0.5) == pytest.approx(0.35)
        mid = part_states_at(drawer_scene, drawer_script, (ev.start + ev.end) / 2)
        assert mid[10] == pytest.approx(0.175)
