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
World-space crack profiles from tactile frames and from the overhead view.
"""

import enum
import math
import os
from typing import Collection, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.ndimage
from pydantic import BaseModel, ConfigDict, model_validator

from crackkit.common import NoReconstructionError, wrap_angle
from crackkit.geometry import (
    Point2Px,
    Point3mm,
    RigidTransform,
    SensorModel,
    default_mount,
    end_effector_to_world,
)
from crackkit.planner import ContactPose, TouchPlan
from crackkit.raster import RasterImage, RasterKind, check_same_shape
from crackkit.tactile import TactileFrame, detect_tactile_crack

_SQUARE = np.ones((3, 3), dtype=bool)


class ReconstructionMethod(str, enum.Enum):
    vision = "vision"
    aligned_vision = "aligned-vision"
    passive_tactile = "passive-tactile"
    active_tactile = "active-tactile"


class ReconstructedProfile(BaseModel):
    """Reconstructed crack points in the world frame.

    `frame_ids` is the index of the tactile frame each point came from (-1 for
    the overhead view) and `pixels` the (u, v) pixel it was lifted from.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: ReconstructionMethod
    points: np.ndarray
    frame_ids: np.ndarray
    pixels: np.ndarray

    @model_validator(mode="after")
    def _validate(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("profile points must be finite")
        frame_ids = np.asarray(self.frame_ids, dtype=np.int64).reshape(-1)
        pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        if not (points.shape[0] == frame_ids.shape[0] == pixels.shape[0]):
            raise ValueError("profile provenance does not match its points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "frame_ids", frame_ids)
        object.__setattr__(self, "pixels", pixels)
        return self

    @classmethod
    def empty(cls, method: ReconstructionMethod) -> "ReconstructedProfile":
        return cls(
            method=method,
            points=np.zeros((0, 3)),
            frame_ids=np.zeros(0, dtype=np.int64),
            pixels=np.zeros((0, 2)),
        )

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def as_points(self) -> List[Point3mm]:
        return [Point3mm.from_array(p) for p in self.points]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "x": self.points[:, 0],
                "y": self.points[:, 1],
                "z": self.points[:, 2],
                "method": self.method.value,
                "frame_id": self.frame_ids,
            }
        )


def boundary_mask(
    mask: RasterImage, include_image_border: bool = True
) -> np.ndarray:
    """Crack pixels with at least one non-crack 8-neighbour.

    With `include_image_border` pixels on the raster edge count as boundary.
    """
    if mask.kind != RasterKind.binary:
        raise ValueError("boundary extraction expects a binary mask")
    data = mask.data
    interior = scipy.ndimage.binary_erosion(
        data, structure=_SQUARE, border_value=0 if include_image_border else 1
    )
    return data & ~interior


def extract_boundary_pixels(
    mask: RasterImage, include_image_border: bool = True
) -> List[Point2Px]:
    rows, cols = np.nonzero(boundary_mask(mask, include_image_border))
    return [Point2Px(u=float(c), v=float(r)) for r, c in zip(rows, cols)]


def _frame_points(
    frame: TactileFrame,
    sensor: SensorModel,
    tce: RigidTransform,
    tew: Optional[RigidTransform] = None,
    all_pixels: bool = False,
):
    mask = detect_tactile_crack(frame.image)
    if all_pixels:
        rows, cols = np.nonzero(mask.data)
    else:
        # the edge of the field of view is not a crack edge
        rows, cols = np.nonzero(boundary_mask(mask, include_image_border=False))
    pixels = np.stack([cols, rows], axis=-1).astype(np.float64)
    if pixels.shape[0] == 0:
        return np.zeros((0, 3)), pixels

    if tew is None:
        tew = end_effector_to_world(frame.pose.position.as_array(), frame.pose.yaw)
    sensor_points = sensor.backproject(pixels)
    return tew.apply(tce.apply(sensor_points)), pixels


def reconstruct_frame(
    frame: TactileFrame,
    sensor: SensorModel,
    tce: Optional[RigidTransform] = None,
    tew: Optional[RigidTransform] = None,
    all_pixels: bool = False,
) -> List[Point3mm]:
    """Lift a frame's crack boundary to world coordinates.

    Boundary pixels are backprojected onto the elastomer plane and carried
    through the sensor mount and the end-effector pose. `tew` defaults to the
    transform implied by the frame's contact pose.
    """
    if tce is None:
        tce = default_mount(sensor)
    points, _ = _frame_points(frame, sensor, tce, tew=tew, all_pixels=all_pixels)
    return [Point3mm.from_array(p) for p in points]


def reconstruct_tactile(
    frames: Sequence[TactileFrame],
    sensor: SensorModel,
    tce: Optional[RigidTransform] = None,
    method: ReconstructionMethod = ReconstructionMethod.active_tactile,
    skip_edges: Collection[int] = (),
) -> ReconstructedProfile:
    """Merge per-frame reconstructions in frame order.

    Frames belonging to `skip_edges` (rejected as painted) contribute nothing.
    """
    if tce is None:
        tce = default_mount(sensor)
    points, frame_ids, pixels = [], [], []
    for idx, frame in enumerate(frames):
        if frame.edge_id is not None and frame.edge_id in skip_edges:
            continue
        pts, px = _frame_points(frame, sensor, tce)
        points.append(pts)
        pixels.append(px)
        frame_ids.append(np.full(pts.shape[0], idx, dtype=np.int64))

    if not points:
        return ReconstructedProfile.empty(method)
    return ReconstructedProfile(
        method=method,
        points=np.concatenate(points),
        frame_ids=np.concatenate(frame_ids),
        pixels=np.concatenate(pixels),
    )


def _mask_pixels(mask: RasterImage):
    rows, cols = np.nonzero(mask.data)
    pixels = np.stack([cols, rows], axis=-1).astype(np.float64)
    return rows, cols, pixels


def reconstruct_vision(mask: RasterImage, depth: RasterImage) -> ReconstructedProfile:
    """Every crack pixel lifted with its height from the depth raster."""
    check_same_shape(mask, depth)
    rows, cols, pixels = _mask_pixels(mask)
    xy = depth.pixels_to_xy(pixels)
    points = np.column_stack([xy, depth.data[rows, cols]])
    return ReconstructedProfile(
        method=ReconstructionMethod.vision,
        points=points,
        frame_ids=np.full(points.shape[0], -1, dtype=np.int64),
        pixels=pixels,
    )


def reconstruct_aligned_vision(
    mask: RasterImage, table_z: float
) -> ReconstructedProfile:
    """Vision points projected onto the known table plane."""
    _, _, pixels = _mask_pixels(mask)
    xy = mask.pixels_to_xy(pixels)
    points = np.column_stack([xy, np.full(xy.shape[0], table_z)])
    return ReconstructedProfile(
        method=ReconstructionMethod.aligned_vision,
        points=points,
        frame_ids=np.full(points.shape[0], -1, dtype=np.int64),
        pixels=pixels,
    )


def _axis_centers(extent: float, view: float, stride: float) -> np.ndarray:
    if extent <= view:
        return np.array([extent / 2.0])
    n = int(math.ceil((extent - view) / stride - 1e-9)) + 1
    centers = view / 2.0 + np.arange(n) * stride
    return np.minimum(centers, extent - view / 2.0)


def passive_raster_plan(
    plate_width: float,
    plate_height: float,
    sensor: SensorModel,
    overlap: float = 0.0,
    n_rotations: int = 1,
    surface_z: float = 0.0,
) -> TouchPlan:
    """Exhaustive grid of presses covering the plate, in serpentine order.

    Every grid position is pressed `n_rotations` times at yaws k*pi/n_rotations.
    """
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    if n_rotations < 1:
        raise ValueError("n_rotations must be >= 1")

    xs = _axis_centers(
        plate_width, sensor.view_width, sensor.view_width * (1.0 - overlap)
    )
    ys = _axis_centers(
        plate_height, sensor.view_height, sensor.view_height * (1.0 - overlap)
    )
    yaws = [wrap_angle(k * math.pi / n_rotations) for k in range(n_rotations)]

    contacts = []
    for row, y in enumerate(ys):
        ordered = xs if row % 2 == 0 else xs[::-1]
        for x in ordered:
            for yaw in yaws:
                contacts.append(
                    ContactPose(
                        position=Point3mm(x=float(x), y=float(y), z=surface_z),
                        yaw=yaw,
                    )
                )
    return TouchPlan(contacts=tuple(contacts))


def save_profile(profile: ReconstructedProfile, path: str):
    """CSV with full float precision."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    profile.to_frame().to_csv(path, index=False, float_format="%.17g")


def load_profile(
    path: str, method: Optional[ReconstructionMethod] = None
) -> ReconstructedProfile:
    df = pd.read_csv(path)
    methods = df["method"].unique().tolist()
    if len(methods) > 1:
        raise RuntimeError(f"Profile {path} mixes methods {methods}")
    if method is None:
        if not methods:
            raise NoReconstructionError(f"Profile {path} has no points")
        method = ReconstructionMethod(methods[0])
    return ReconstructedProfile(
        method=method,
        points=df[["x", "y", "z"]].to_numpy(dtype=np.float64),
        frame_ids=df["frame_id"].to_numpy(dtype=np.int64),
        pixels=np.full((len(df), 2), np.nan),
    )


def save_ply(profile: ReconstructedProfile, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment method {profile.method.value}",
        f"element vertex {len(profile)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    lines.extend(f"{x!r} {y!r} {z!r}" for x, y, z in profile.points.tolist())
    with open(path, "w", encoding="utf-8") as fp:
        fp.write("\n".join(lines) + "\n")
