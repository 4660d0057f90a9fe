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
"""
Visual crack segmentation.

Any producer of a binary crack mask can stand in for the segmentation network;
`baseline` thresholds a grayscale render and cleans it with square morphology,
`mask-file` reads a mask produced elsewhere (for example by a learned model
trained with a crack-weighted cross-entropy loss).
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
import scipy.ndimage
from pydantic import BaseModel, field_validator

from crackkit.common import DimensionMismatchError
from crackkit.io.raster_io import load_raster, save_raster
from crackkit.raster import RasterImage, RasterKind


class SegmenterConfig(BaseModel, frozen=True):
    method: str = "baseline"
    threshold: float = 0.5
    open_radius: int = 0
    close_radius: int = 0
    mask_path: Optional[str] = None

    @field_validator("threshold")
    @classmethod
    def _threshold_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        return value

    @field_validator("open_radius", "close_radius")
    @classmethod
    def _nonnegative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("morphology radius must be >= 0")
        return value


class Segmenter(ABC):
    @abstractmethod
    def segment(self, image: RasterImage, cfg: SegmenterConfig) -> RasterImage:
        ...


class ThresholdSegmenter(Segmenter):
    def segment(self, image: RasterImage, cfg: SegmenterConfig) -> RasterImage:
        return segment_baseline(image, cfg)


class MaskFileSegmenter(Segmenter):
    def segment(self, image: RasterImage, cfg: SegmenterConfig) -> RasterImage:
        if not cfg.mask_path:
            raise RuntimeError("mask-file segmenter requires mask_path")
        mask = load_mask(cfg.mask_path)
        if mask.shape != image.shape:
            raise DimensionMismatchError(
                f"Mask {cfg.mask_path} is {mask.width}x{mask.height}, "
                f"image is {image.width}x{image.height}"
            )
        logging.info(f"Loaded external crack mask from {cfg.mask_path}")
        return image.with_data(mask.data, kind=RasterKind.binary)


def get(method: str) -> Segmenter:
    if method == "baseline":
        return ThresholdSegmenter()
    elif method == "mask-file":
        return MaskFileSegmenter()
    raise RuntimeError(f"Unimplemented segmentation method {method}")


def segment_baseline(image: RasterImage, cfg: SegmenterConfig) -> RasterImage:
    """Dark pixels are crack; then square opening and closing."""
    if image.kind == RasterKind.binary:
        mask = image.data.copy()
    else:
        mask = image.data < cfg.threshold

    if cfg.open_radius > 0:
        mask = _open(mask, cfg.open_radius)
    if cfg.close_radius > 0:
        mask = _close(mask, cfg.close_radius)
    return image.with_data(mask, kind=RasterKind.binary)


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def _open(mask: np.ndarray, radius: int) -> np.ndarray:
    # replicate edges so cracks running off the image are not eroded at the border
    padded = np.pad(mask, radius, mode="edge")
    res = scipy.ndimage.binary_opening(padded, structure=_square(radius))
    return res[radius:-radius, radius:-radius]


def _close(mask: np.ndarray, radius: int) -> np.ndarray:
    padded = np.pad(mask, radius, mode="constant", constant_values=False)
    res = scipy.ndimage.binary_closing(padded, structure=_square(radius))
    return res[radius:-radius, radius:-radius]


def load_mask(path: str) -> RasterImage:
    raster, _ = load_raster(path)
    if raster.kind != RasterKind.binary:
        raster = raster.with_data(raster.data > 0, kind=RasterKind.binary)
    return raster


def save_mask(mask: RasterImage, path: str):
    if mask.kind != RasterKind.binary:
        raise ValueError("save_mask expects a binary raster")
    save_raster(mask, path)


__all__ = [
    "SegmenterConfig",
    "Segmenter",
    "ThresholdSegmenter",
    "MaskFileSegmenter",
    "get",
    "segment_baseline",
    "load_mask",
    "save_mask",
]
