"""Interaction/static interval detection from hand-scene contact.

Per frame, the hand is a ball of radius R; contact holds when more than a
threshold count of back-projected depth points fall inside it. The binary
series is smoothed by morphological opening then closing (replicate-padded)
and partitioned into maximal runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import CameraModel, backproject, ball_count


@dataclass(frozen=True)
class ContactParams:
    hand_radius: float = 0.10
    point_threshold: int = 20
    kernel: int = 10  # frames; one second at the default 10 Hz

    def __post_init__(self):
        if self.hand_radius <= 0 or self.point_threshold <= 0 or self.kernel < 1:
            raise ValueError("contact parameters must be positive")


@dataclass(frozen=True)
class KeyframePartition:
    """Interleaved interaction/static intervals as inclusive frame-index pairs.

    Intervals are 0-based [start, end] pairs; together both lists tile the
    frame range exactly.
    """

    interactions: tuple
    statics: tuple
    n_frames: int

    def static_preceding(self, interaction):
        """Static interval ending right before the interaction, or None."""
        for iv in self.statics:
            if iv[1] == interaction[0] - 1:
                return iv
        return None

    def static_following(self, interaction):
        for iv in self.statics:
            if iv[0] == interaction[1] + 1:
                return iv
        return None


def contact_indicator(frame, camera: CameraModel, params: ContactParams) -> bool:
    """True when more than `point_threshold` depth points fall in the hand ball."""
    if not np.all(np.isfinite(frame.hand)):
        return False
    cloud = backproject(frame.depth, camera, frame.camera_pose)
    if cloud.is_empty:
        return False
    return ball_count(cloud, frame.hand, params.hand_radius) > params.point_threshold


def _slide(series: np.ndarray, pad_l: int, pad_r: int, reduce) -> np.ndarray:
    padded = np.concatenate(
        [np.full(pad_l, series[0]), series, np.full(pad_r, series[-1])]
    )
    windows = np.lib.stride_tricks.sliding_window_view(padded, pad_l + pad_r + 1)
    return reduce(windows, 1)


def _erode(series: np.ndarray, kernel: int) -> np.ndarray:
    pad_l = (kernel - 1) // 2
    return _slide(series, pad_l, kernel - 1 - pad_l, np.min)


def _dilate(series: np.ndarray, kernel: int) -> np.ndarray:
    # dilation reflects the structuring element, so the padding swaps sides;
    # without the swap, even kernels break opening/closing idempotence
    pad_l = (kernel - 1) // 2
    return _slide(series, kernel - 1 - pad_l, pad_l, np.max)


def smooth_binary(series, kernel: int) -> np.ndarray:
    """Morphological opening then closing with a flat element of `kernel` frames."""
    if kernel < 1:
        raise ValueError("kernel must be >= 1")
    arr = np.asarray(series, dtype=bool).astype(np.uint8)
    if arr.size == 0 or kernel == 1:
        return arr.astype(bool)
    opened = _dilate(_erode(arr, kernel), kernel)
    closed = _erode(_dilate(opened, kernel), kernel)
    return closed.astype(bool)


def partition(series) -> KeyframePartition:
    """Maximal runs of ones -> interactions, runs of zeros -> statics."""
    arr = np.asarray(series, dtype=bool)
    n = arr.size
    if n == 0:
        return KeyframePartition((), (), 0)
    change = np.flatnonzero(np.diff(arr.astype(np.int8)))
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change, [n - 1]])
    interactions = []
    statics = []
    for s, e in zip(starts, ends):
        (interactions if arr[s] else statics).append((int(s), int(e)))
    return KeyframePartition(tuple(interactions), tuple(statics), n)


def detect_keyframes(frames, camera: CameraModel, params: ContactParams) -> KeyframePartition:
    raw = np.array([contact_indicator(f, camera, params) for f in frames])
    return partition(smooth_binary(raw, params.kernel))
