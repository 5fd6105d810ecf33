"""Keyframe detection: morphology oracles and simulator ground truth."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artiscene.keyframes import (
    ContactParams,
    contact_indicator,
    detect_keyframes,
    partition,
    smooth_binary,
)
from artiscene.sim import simulate


def bits(s: str) -> np.ndarray:
    return np.array([c == "1" for c in s])


class TestSmoothBinary:
    def test_opening_removes_spur(self):
        assert not smooth_binary(bits("0001000"), 3).any()

    def test_closing_fills_gap(self):
        assert smooth_binary(bits("1110111"), 3).all()

    def test_length_preserved(self):
        out = smooth_binary(bits("0011100110"), 4)
        assert out.size == 10

    @given(st.lists(st.booleans(), min_size=1, max_size=80), st.integers(1, 9))
    @settings(max_examples=200, deadline=None)
    def test_matches_definitional_oracle(self, series, kernel):
        arr = np.array(series, dtype=bool)
        got = smooth_binary(arr, kernel)
        want = _oracle_open_close(arr, kernel)
        assert np.array_equal(got, want)

    @given(st.lists(st.booleans(), min_size=1, max_size=80), st.integers(1, 9))
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, series, kernel):
        once = smooth_binary(np.array(series, dtype=bool), kernel)
        twice = smooth_binary(once, kernel)
        assert np.array_equal(once, twice)

    @given(st.lists(st.booleans(), min_size=1, max_size=80), st.integers(1, 9))
    @settings(max_examples=200, deadline=None)
    def test_no_short_interior_runs(self, series, kernel):
        out = smooth_binary(np.array(series, dtype=bool), kernel)
        part = partition(out)
        for group in (part.interactions, part.statics):
            for s, e in group:
                if s > 0 and e < out.size - 1:  # boundary runs may stay short
                    assert e - s + 1 >= kernel


def _oracle_open_close(series: np.ndarray, kernel: int) -> np.ndarray:
    """Definitional morphology: offset sets with index clamping (= replicate).

    Erosion takes min over offsets B = [-pad_l, pad_r]; dilation takes max
    over the reflected offsets (a[i - b] for b in B).
    """
    n = series.size
    pad_l = (kernel - 1) // 2
    offsets = np.arange(-pad_l, kernel - pad_l)

    def erode(a):
        return np.array(
            [min(a[np.clip(i + b, 0, n - 1)] for b in offsets) for i in range(n)],
            dtype=bool,
        )

    def dilate(a):
        return np.array(
            [max(a[np.clip(i - b, 0, n - 1)] for b in offsets) for i in range(n)],
            dtype=bool,
        )

    opened = dilate(erode(series))
    return erode(dilate(opened))


class TestPartition:
    def test_all_zeros(self):
        part = partition(bits("00000"))
        assert part.interactions == ()
        assert part.statics == ((0, 4),)

    def test_spec_example(self):
        part = partition(bits("0011100"))
        assert part.interactions == ((2, 4),)
        assert part.statics == ((0, 1), (5, 6))

    def test_all_ones(self):
        part = partition(bits("111"))
        assert part.interactions == ((0, 2),)
        assert part.statics == ()

    @given(st.lists(st.booleans(), min_size=1, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_tiles_timeline_exactly(self, series):
        part = partition(np.array(series, dtype=bool))
        covered = sorted(
            [iv for iv in part.interactions] + [iv for iv in part.statics]
        )
        pos = 0
        for s, e in covered:
            assert s == pos
            assert e >= s
            pos = e + 1
        assert pos == len(series)

    def test_neighbor_lookup(self):
        part = partition(bits("0011100"))
        assert part.static_preceding((2, 4)) == (0, 1)
        assert part.static_following((2, 4)) == (5, 6)


class TestContactIndicator:
    def test_hand_far_from_surface(self, drawer_scene, drawer_script, camera):
        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=2.0, seed=0)
        params = ContactParams(hand_radius=0.10, point_threshold=20, kernel=3)
        assert not contact_indicator(frames[0], camera, params)

    def test_hand_on_surface(self, drawer_scene, drawer_script, camera):
        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=10.0, seed=0)
        params = ContactParams(hand_radius=0.10, point_threshold=10, kernel=3)
        mid = [f for f in frames if 7.0 <= f.timestamp <= 8.0]
        assert all(contact_indicator(f, camera, params) for f in mid)

    def test_count_matches_linear_scan(self, drawer_scene, drawer_script, camera):
        from artiscene.geom import backproject

        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=10.0, seed=0)
        f = frames[75]  # mid-interaction
        cloud = backproject(f.depth, camera, f.camera_pose)
        count = int(np.sum(np.linalg.norm(cloud.points - f.hand, axis=1) <= 0.10))
        params = ContactParams(hand_radius=0.10, point_threshold=count - 1, kernel=3)
        assert contact_indicator(f, camera, params)
        params2 = ContactParams(hand_radius=0.10, point_threshold=count, kernel=3)
        assert not contact_indicator(f, camera, params2)

    def test_nan_hand_is_false(self, drawer_scene, drawer_script, camera):
        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=2.0, seed=0)
        f = frames[5]
        bad = type(f)(
            timestamp=f.timestamp,
            hand=np.array([np.nan, 0.0, 0.0]),
            depth=f.depth,
            instance_map=f.instance_map,
            camera_pose=f.camera_pose,
        )
        params = ContactParams()
        assert not contact_indicator(bad, camera, params)

    def test_empty_depth_is_false(self, drawer_scene, drawer_script, camera):
        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=2.0, seed=0)
        f = frames[0]
        empty = type(f)(
            timestamp=f.timestamp,
            hand=f.hand,
            depth=np.zeros_like(f.depth),
            instance_map=f.instance_map,
            camera_pose=f.camera_pose,
        )
        assert not contact_indicator(empty, camera, ContactParams())


class TestDetectEndToEnd:
    def test_single_event_detected_within_kernel(self, drawer_scene, drawer_script, camera):
        rate = 10.0
        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=rate, seed=1)
        params = ContactParams(hand_radius=0.10, point_threshold=20, kernel=int(rate))
        part = detect_keyframes(frames, camera, params)
        assert len(part.interactions) == 1
        s, e = part.interactions[0]
        ev = drawer_script.events[0]
        tol = params.kernel
        assert abs(s - ev.start * rate) <= tol
        assert abs(e - ev.end * rate) <= tol

    def test_monotone_radius_never_loses_contact(self, drawer_scene, drawer_script, camera):
        frames, _ = simulate(drawer_scene, drawer_script, camera, rate=10.0, seed=1)
        f = frames[75]
        small = ContactParams(hand_radius=0.08, point_threshold=15, kernel=3)
        large = ContactParams(hand_radius=0.20, point_threshold=15, kernel=3)
        if contact_indicator(f, camera, small):
            assert contact_indicator(f, camera, large)
