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

import enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from crackkit.common import DimensionMismatchError, OutOfBoundsPixelError
from crackkit.geometry import Point2Px, Point3mm


class RasterKind(str, enum.Enum):
    grayscale = "grayscale"
    binary = "binary"


class RasterImage(BaseModel):
    """Row-major raster with a world placement.

    Pixel (u, v) (column, row) has its centre at `origin + (u, v, 0) * scale`.
    Grayscale data is float64, binary data is bool.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: RasterKind
    data: np.ndarray
    scale: float = 1.0
    origin: Point3mm = Point3mm(x=0.0, y=0.0, z=0.0)

    @field_validator("data", mode="before")
    @classmethod
    def _as_array(cls, value):
        return np.asarray(value)

    @field_validator("scale")
    @classmethod
    def _positive_scale(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("raster scale must be positive")
        return value

    @model_validator(mode="after")
    def _normalize_data(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"raster data must be 2-D, got shape {data.shape}")
        if self.kind == RasterKind.binary:
            data = data.astype(bool)
        else:
            data = data.astype(np.float64)
        object.__setattr__(self, "data", data)
        return self

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def binary(cls, data: np.ndarray, **kwargs) -> "RasterImage":
        return cls(kind=RasterKind.binary, data=data, **kwargs)

    @classmethod
    def grayscale(cls, data: np.ndarray, **kwargs) -> "RasterImage":
        return cls(kind=RasterKind.grayscale, data=data, **kwargs)

    def with_data(
        self, data: np.ndarray, kind: Optional[RasterKind] = None
    ) -> "RasterImage":
        """Same placement, new pixels."""
        return RasterImage(
            kind=kind or self.kind, data=data, scale=self.scale, origin=self.origin
        )

    def pixel_centers(self) -> np.ndarray:
        """World (x, y) of every pixel centre, shape (H, W, 2)."""
        cols = self.origin.x + np.arange(self.width) * self.scale
        rows = self.origin.y + np.arange(self.height) * self.scale
        xx, yy = np.meshgrid(cols, rows)
        return np.stack([xx, yy], axis=-1)

    def pixels_to_xy(self, pixels: np.ndarray) -> np.ndarray:
        """Map (N, 2) pixel coordinates (u, v) to world (x, y)."""
        pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
        origin = np.array([self.origin.x, self.origin.y])
        return origin + pixels * self.scale

    def xy_to_pixels(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        origin = np.array([self.origin.x, self.origin.y])
        return (xy - origin) / self.scale

    def contains(self, px: Point2Px) -> bool:
        col, row = int(round(px.u)), int(round(px.v))
        return 0 <= col < self.width and 0 <= row < self.height

    def sample(self, px: Point2Px) -> float:
        """Nearest-pixel lookup."""
        if not self.contains(px):
            raise OutOfBoundsPixelError(
                f"Pixel ({px.u}, {px.v}) outside {self.width}x{self.height} raster"
            )
        return float(self.data[int(round(px.v)), int(round(px.u))])


def check_same_shape(a: RasterImage, b: RasterImage):
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"Raster dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


__all__ = ["RasterKind", "RasterImage", "check_same_shape"]
