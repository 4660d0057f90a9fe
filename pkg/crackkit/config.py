# Copyright (C) 2024 Charles O. Goddard
#
# This software is free software: you can redistribute it and/or
# modify it under the terms of the GNU Lesser General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This software is distributed in the hope that it will be useful, but
# WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU
# Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with this program. If not, see http://www.gnu.org/licenses/.

from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, ValidationError, field_validator

from crackkit.evaluation import EvaluationConfig
from crackkit.geometry import RigidTransform, SensorModel, default_mount
from crackkit.planner import PlannerConfig
from crackkit.scene import SceneParameters
from crackkit.segmentation import SegmenterConfig
from crackkit.skeleton import SkeletonConfig
from crackkit.tactile import RejectionConfig


class RenderConfig(BaseModel, frozen=True):
    mm_per_px: float = 0.5
    image_noise: float = 0.02
    depth_noise: float = 0.3

    @field_validator("mm_per_px")
    @classmethod
    def _positive_scale(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("mm_per_px must be positive")
        return value

    @field_validator("image_noise", "depth_noise")
    @classmethod
    def _nonnegative_noise(cls, value: float) -> float:
        if value < 0:
            raise ValueError("noise sigma must be >= 0")
        return value


class PipelineConfig(BaseModel, frozen=True):
    seed: int = 0
    out_dir: str = "crackkit-out"
    suite_size: int = 20
    scene: SceneParameters = SceneParameters()
    render: RenderConfig = RenderConfig()
    segmentation: SegmenterConfig = SegmenterConfig()
    skeleton: SkeletonConfig = SkeletonConfig()
    planner: PlannerConfig = PlannerConfig()
    sensor: SensorModel = SensorModel()
    mount: Optional[RigidTransform] = None
    rejection: RejectionConfig = RejectionConfig()
    evaluation: EvaluationConfig = EvaluationConfig()

    @field_validator("suite_size")
    @classmethod
    def _positive_suite(cls, value: int) -> int:
        if value < 1:
            raise ValueError("suite_size must be >= 1")
        return value

    def tce(self) -> RigidTransform:
        """Sensor-to-end-effector transform."""
        return self.mount or default_mount(self.sensor)

    def seeds(self) -> List[int]:
        return [self.seed + i for i in range(self.suite_size)]


def load_config(path: Optional[str]) -> PipelineConfig:
    """Read a JSON or YAML config document; no path means all defaults."""
    if not path:
        return PipelineConfig()
    with open(path, "r", encoding="utf-8") as file:
        data = yaml.safe_load(file.read())
    return PipelineConfig.model_validate(data or {})


def with_overrides(config: PipelineConfig, overrides: Dict[str, Any]) -> PipelineConfig:
    """Re-validate `config` with dotted-path overrides applied.

    Keys look like `planner.d`; values of None are skipped.
    """
    data = config.model_dump(mode="json")
    for key, value in overrides.items():
        if value is None:
            continue
        target = data
        *parents, leaf = key.split(".")
        for name in parents:
            target = target.setdefault(name, {})
        target[leaf] = value
    return PipelineConfig.model_validate(data)


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "Invalid configuration:\n  " + "\n  ".join(lines)
