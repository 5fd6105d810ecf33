"""Pipeline configuration: one flat record, loadable/dumpable as JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .artic.fit import FitConfig
from .errors import SceneSpecError
from .graph.integrate import IntegrateConfig
from .keyframes import ContactParams


@dataclass
class PipelineConfig:
    seed: int = 0
    # contact detection
    hand_radius: float = 0.10
    contact_points: int = 20
    kernel_seconds: float = 1.0
    # geometry
    voxel_size: float = 0.02
    fusion_cell: float = 0.01
    # joint fitting
    lambda_g: float = 1.0
    lambda_h: float = 1.0
    lambda_p: float = 1e-4
    overlap_sigma: float = 0.05
    max_outer: int = 12
    max_inner: int = 60
    fit_tol: float = 1e-12
    max_part_points: int = 4000
    min_part_points: int = 30
    # object layer
    merge_cos: float = 0.9
    merge_overlap: float = 0.25
    prune_overlap: float = 0.5
    min_instance_points: int = 15
    constrains_tol: float = 0.005
    # modes
    use_disparity: bool = False
    hands_only: bool = False
    no_art: bool = False

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(Path(path)) as fh:
            data = json.load(fh)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SceneSpecError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_file(self, path) -> None:
        with open(Path(path), "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def with_overrides(self, **overrides) -> "PipelineConfig":
        data = asdict(self)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in data:
                raise SceneSpecError(f"unknown config key: {key}")
            data[key] = value
        return PipelineConfig(**data)

    # -- per-module views --------------------------------------------------
    def contact_params(self, rate: float) -> ContactParams:
        return ContactParams(
            hand_radius=self.hand_radius,
            point_threshold=self.contact_points,
            kernel=max(1, int(round(self.kernel_seconds * rate))),
        )

    def fit_config(self) -> FitConfig:
        return FitConfig(
            lambda_g=0.0 if self.hands_only else self.lambda_g,
            lambda_h=self.lambda_h,
            lambda_p=0.0 if self.hands_only else self.lambda_p,
            overlap_sigma=self.overlap_sigma,
            max_outer=self.max_outer,
            max_inner=self.max_inner,
            tol=self.fit_tol,
            max_part_points=self.max_part_points,
        )

    def integrate_config(self) -> IntegrateConfig:
        return IntegrateConfig(
            merge_cos=self.merge_cos,
            merge_overlap=self.merge_overlap,
            prune_overlap=self.prune_overlap,
            min_instance_points=self.min_instance_points,
            constrains_tol=self.constrains_tol,
            no_art=self.no_art,
        )
