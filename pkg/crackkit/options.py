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

import functools
import typing
from typing import Any, Callable, Dict, Optional

import click
from pydantic import BaseModel
from pydantic.fields import FieldInfo

from crackkit.config import PipelineConfig, with_overrides


class PipelineOptions(BaseModel):
    seed: Optional[int] = None
    out_dir: Optional[str] = None
    mm_per_px: Optional[float] = None
    seg_threshold: Optional[float] = None
    seg_open: Optional[int] = None
    seg_close: Optional[int] = None
    step_d_mm: Optional[float] = None
    area_threshold: Optional[float] = None
    min_low_frames: Optional[int] = None
    quiet: bool = False

    def apply(self, config: PipelineConfig) -> PipelineConfig:
        """Config with every option that was given on the command line applied."""
        return with_overrides(config, self.overrides())

    def overrides(self) -> Dict[str, Any]:
        return {
            OPTION_TARGETS[name]: getattr(self, name)
            for name in OPTION_TARGETS
            if getattr(self, name) is not None
        }


OPTION_TARGETS = {
    "seed": "seed",
    "out_dir": "out_dir",
    "mm_per_px": "render.mm_per_px",
    "seg_threshold": "segmentation.threshold",
    "seg_open": "segmentation.open_radius",
    "seg_close": "segmentation.close_radius",
    "step_d_mm": "planner.d",
    "area_threshold": "rejection.area_threshold",
    "min_low_frames": "rejection.min_low_frames",
}

OPTION_HELP = {
    "seed": "Base random seed for scene generation",
    "out_dir": "Directory to write artifacts into",
    "mm_per_px": "Overhead raster resolution in mm per pixel",
    "seg_threshold": "Grayscale threshold below which a pixel is crack",
    "seg_open": "Radius (px) of the square opening applied to the mask",
    "seg_close": "Radius (px) of the square closing applied to the mask",
    "step_d_mm": "Maximum world distance between consecutive contacts (mm)",
    "area_threshold": "Crack area fraction below which a tactile frame counts as empty",
    "min_low_frames": "Number of empty frames that mark an edge as a painted crack",
    "quiet": "Suppress progress bars and other non-essential output",
}


def _option_type(info: FieldInfo) -> type:
    args = [a for a in typing.get_args(info.annotation) if a is not type(None)]
    return args[0] if args else info.annotation


def _make_option(field_name: str, info: FieldInfo) -> Callable:
    flag = "--" + field_name.replace("_", "-")
    help_str = OPTION_HELP.get(field_name)
    target = OPTION_TARGETS.get(field_name)
    if target and target != field_name:
        help_str = f"{help_str} (overrides {target})"

    if _option_type(info) is bool:
        return click.option(flag, is_flag=True, default=False, help=help_str)
    # None means "keep the config value"
    return click.option(flag, type=_option_type(info), default=None, help=help_str)


def add_pipeline_options(f: Callable) -> Callable:
    """Add one click flag per `PipelineOptions` field and collect them back into
    a single `pipeline_options` argument."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        given = {
            name: kwargs.pop(name)
            for name in PipelineOptions.model_fields
            if name in kwargs
        }
        kwargs["pipeline_options"] = PipelineOptions(**given)
        return f(*args, **kwargs)

    for field_name, info in reversed(PipelineOptions.model_fields.items()):
        wrapper = _make_option(field_name, info)(wrapper)
    return wrapper
