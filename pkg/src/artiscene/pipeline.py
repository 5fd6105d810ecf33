"""End-to-end reconstruction: keyframes -> discovery/update -> scene graph.

Walks the interval partition chronologically. Each static interval is
integrated under the mode set by the interaction preceding it: plain static,
discovery of a new part (flood-fill extraction, line/arc classification,
joint fitting), or an update of a revisited part (hand-overlap matching plus
the running-max state sweep). Estimation failures degrade to static
integration and are logged, never fatal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .artic import classify_and_init, extract_part, fit_joint, fuse_static
from .artic.initfit import random_init
from .artic.update import match_revisited, update_state
from .config import PipelineConfig
from .depthscale import apply_scale_shift, background_mask, fit_scale_shift, sample_mask
from .errors import ArtisceneError
from .geom import PointCloud
from .graph import SceneGraph, integrate_discovery, integrate_static, integrate_update
from .keyframes import detect_keyframes
from .sim.dataset import Dataset
from .sim.simulate import Frame


@dataclass
class PipelineResult:
    graph: SceneGraph
    partition: object
    diagnostics: list = field(default_factory=list)
    scale_log: list = field(default_factory=list)
    features_by_label: dict = field(default_factory=dict)
    log: list = field(default_factory=list)


def reconstruct_depth_frames(dataset: Dataset, cfg: PipelineConfig):
    """Replace depth with scale/shift-recovered depth from disparity."""
    rng = np.random.default_rng(cfg.seed)
    bg_ids = dataset.background_ids
    frames = []
    scale_log = []
    for k, frame in enumerate(dataset.frames):
        if frame.disparity is None:
            raise ArtisceneError(f"frame {k:06d} has no disparity channel")
        mask = background_mask(frame.instance_map, bg_ids) & (frame.depth > 0)
        mask = sample_mask(mask, rng)
        params = fit_scale_shift(frame.disparity, frame.depth, mask)
        depth = apply_scale_shift(frame.disparity, params).astype(np.float32)
        scale_log.append((frame.timestamp, params.s, params.s0))
        frames.append(
            Frame(
                timestamp=frame.timestamp,
                hand=frame.hand,
                depth=depth,
                instance_map=frame.instance_map,
                camera_pose=frame.camera_pose,
                disparity=frame.disparity,
            )
        )
    return frames, scale_log


def run_pipeline(dataset: Dataset, cfg: PipelineConfig) -> PipelineResult:
    camera = dataset.camera
    frames = dataset.frames
    scale_log = []
    if cfg.use_disparity:
        frames, scale_log = reconstruct_depth_frames(dataset, cfg)

    instance_labels = {i: info["label"] for i, info in dataset.instances.items()}
    features = dataset.features
    params = cfg.contact_params(dataset.rate)
    partition = detect_keyframes(frames, camera, params)

    graph = SceneGraph(voxel_size=cfg.voxel_size)
    result = PipelineResult(
        graph=graph,
        partition=partition,
        scale_log=scale_log,
        features_by_label=features,
    )
    rng = np.random.default_rng(cfg.seed)
    fit_cfg = cfg.fit_config()
    int_cfg = cfg.integrate_config()
    fused_cache: dict = {}

    def fused(interval):
        if interval not in fused_cache:
            fused_cache[interval] = fuse_static(
                frames[interval[0] : interval[1] + 1], camera, cfg.fusion_cell
            )
        return fused_cache[interval]

    def slice_frames(interval):
        return frames[interval[0] : interval[1] + 1]

    def log(msg: str):
        result.log.append(msg)

    data_start = frames[0].timestamp if frames else 0.0
    part_order: list[int] = []  # node ids in discovery order

    for static_iv in partition.statics:
        interaction = _interaction_before(partition, static_iv)
        if interaction is None:
            log(f"static [{static_iv[0]}..{static_iv[1]}]: plain integration")
            integrate_static(
                graph, slice_frames(static_iv), camera, instance_labels, features, int_cfg
            )
            continue
        _handle_interaction(
            graph, frames, camera, partition, interaction, static_iv,
            instance_labels, features, cfg, fit_cfg, int_cfg,
            fused, slice_frames, rng, data_start, part_order, result,
        )

    trailing = [iv for iv in partition.interactions if partition.static_following(iv) is None]
    for iv in trailing:
        log(f"interaction [{iv[0]}..{iv[1]}]: no following static interval, skipped")
        result.diagnostics.append(_diag(frames, iv, "skipped", reason="no_following_static"))

    if frames:
        graph.last_time = max(graph.last_time, frames[-1].timestamp)
    return result


def _interaction_before(partition, static_iv):
    for iv in partition.interactions:
        if iv[1] == static_iv[0] - 1:
            return iv
    return None


def _diag(frames, interval, mode, **extra):
    row = {
        "start_index": interval[0],
        "end_index": interval[1],
        "start_time": frames[interval[0]].timestamp,
        "end_time": frames[interval[1]].timestamp,
        "mode": mode,
    }
    row.update(extra)
    return row


def _valid_hands(frames, interval):
    hands = np.array([frames[k].hand for k in range(interval[0], interval[1] + 1)])
    good = np.all(np.isfinite(hands), axis=1)
    return hands[good]


def _handle_interaction(
    graph, frames, camera, partition, interaction, after_iv,
    instance_labels, features, cfg, fit_cfg, int_cfg,
    fused, slice_frames, rng, data_start, part_order, result,
):
    times = (frames[interaction[0]].timestamp, frames[interaction[1]].timestamp)
    after_frames = slice_frames(after_iv)

    def fall_back(reason: str):
        result.log.append(f"interaction {interaction}: {reason}; treating interval as static")
        result.diagnostics.append(_diag(frames, interaction, "skipped", reason=reason))
        integrate_static(graph, after_frames, camera, instance_labels, features, int_cfg)

    hands = _valid_hands(frames, interaction)
    if hands.shape[0] < 3:
        fall_back("fewer than 3 valid hand poses")
        return

    # revisit check against each known part at its current state; the smoothed
    # window can start before true contact, so scan the early hands for the
    # first one that overlaps a known part
    t_start = frames[interaction[0]].timestamp
    current_clouds = []
    for pid in part_order:
        pose = graph.part_pose_at(pid, t_start)
        current_clouds.append(graph.nodes[pid].geometry.transformed(pose))
    matched = None
    anchor_idx = 0
    for k in range(max(1, hands.shape[0] // 4)):
        matched = match_revisited(hands[k], current_clouds, cfg.overlap_sigma, cfg.hand_radius)
        if matched is not None:
            anchor_idx = k
            break

    if matched is not None:
        part_id = part_order[matched]
        node = graph.nodes[part_id]
        state = graph.events.state_at(part_id, t_start)
        res = update_state(
            current_clouds[matched], node.joint, state, hands[anchor_idx:],
            cfg.overlap_sigma, cfg.hand_radius,
        )
        integrate_update(
            graph, after_frames, camera, part_id, res.dtheta, times,
            instance_labels, features, int_cfg,
        )
        result.log.append(
            f"interaction {interaction}: update of part {part_id} "
            f"(phi={res.phi:.4f}, state={res.dtheta:.4f})"
        )
        result.diagnostics.append(
            _diag(frames, interaction, "update", part=part_id,
                  phi=res.phi, state=res.dtheta)
        )
        return

    # discovery
    before_iv = partition.static_preceding(interaction)
    if before_iv is None:
        before_iv = partition.statics[0] if partition.statics else None
    if before_iv is None:
        fall_back("no static interval available for a before-mesh")
        return
    mesh_before = fused(before_iv)
    mesh_after = fused(after_iv)
    if mesh_before.is_empty or mesh_after.is_empty:
        fall_back("empty fused geometry")
        return

    try:
        part_cloud = extract_part(
            mesh_before, mesh_after, hands[-1], match_radius=2.0 * cfg.fusion_cell
        )
    except ArtisceneError as exc:
        fall_back(f"part extraction failed: {exc}")
        return
    if len(part_cloud) < cfg.min_part_points:
        fall_back(f"extracted part too small ({len(part_cloud)} points)")
        return

    try:
        if cfg.hands_only:
            init = random_init(hands, rng)
        else:
            init = classify_and_init(hands)
        estimate = fit_joint(
            part_cloud,
            None if cfg.hands_only else mesh_before,
            hands[init.inliers],
            init,
            fit_cfg,
        )
    except ArtisceneError as exc:
        fall_back(f"joint estimation failed: {exc}")
        return

    part_id = integrate_discovery(
        graph, after_frames, camera, estimate, times, data_start,
        instance_labels, features, int_cfg,
    )
    part_order.append(part_id)
    result.log.append(
        f"interaction {interaction}: discovered part {part_id} "
        f"({estimate.joint.kind}, dtheta={estimate.dtheta:.4f}, "
        f"Jg={estimate.cost_geometry:.2e}, Jh={estimate.cost_hand:.2e}, "
        f"converged={estimate.converged})"
    )
    result.diagnostics.append(
        _diag(
            frames, interaction, "discovery",
            part=part_id,
            kind=estimate.joint.kind,
            dtheta=estimate.dtheta,
            cost_geometry=estimate.cost_geometry,
            cost_hand=estimate.cost_hand,
            objective=estimate.objective,
            converged=estimate.converged,
            n_outer=estimate.n_outer,
        )
    )
