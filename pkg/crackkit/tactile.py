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
Simulated GelSight presses and tactile false-positive rejection.

A press reads the groove under the elastomer: a sensor pixel is crack when the
world point it images lies inside a real crack. Painted cracks have no relief
and are invisible to touch.
"""

import functools
import glob
import logging
import os
from typing import Dict, Iterable, List, Optional, Set

import numpy as np
import scipy.ndimage
import tqdm
from pydantic import BaseModel, field_validator, model_validator

from crackkit.common import OffSurfaceError, polyline_distances
from crackkit.geometry import (
    Frame,
    Point3mm,
    RigidTransform,
    SensorModel,
    default_mount,
    end_effector_to_world,
)
from crackkit.io.raster_io import load_raster, save_raster
from crackkit.planner import ContactPose, TouchPlan
from crackkit.raster import RasterImage, RasterKind, check_same_shape
from crackkit.scene import CrackScene, crack_coverage
from crackkit.segmentation import SegmenterConfig, segment_baseline
from crackkit.skeleton import SkeletonGraph


class TactileFrame(BaseModel, frozen=True):
    pose: ContactPose
    image: RasterImage
    crack_area_fraction: float
    edge_id: Optional[int] = None

    @model_validator(mode="after")
    def _check_fraction(self):
        data = self.image.data
        if data.size and self.crack_area_fraction != np.count_nonzero(data) / data.size:
            raise ValueError("crack_area_fraction does not match the frame image")
        return self

    @classmethod
    def from_image(
        cls, pose: ContactPose, image: RasterImage, edge_id: Optional[int] = None
    ) -> "TactileFrame":
        data = image.data
        fraction = np.count_nonzero(data) / data.size if data.size else 0.0
        return cls(
            pose=pose, image=image, crack_area_fraction=fraction, edge_id=edge_id
        )


class RejectionConfig(BaseModel, frozen=True):
    area_threshold: float = 1.0 / 50.0
    min_low_frames: int = 2

    @field_validator("area_threshold")
    @classmethod
    def _threshold_range(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("area_threshold must lie in (0, 1)")
        return value

    @field_validator("min_low_frames")
    @classmethod
    def _min_frames(cls, value: int) -> int:
        if value < 1:
            raise ValueError("min_low_frames must be >= 1")
        return value


@functools.lru_cache(maxsize=8)
def _sensor_grid(sensor: SensorModel, mount: RigidTransform) -> np.ndarray:
    """End-effector coordinates of every sensor pixel on the elastomer plane."""
    cols, rows = np.meshgrid(
        np.arange(sensor.image_width, dtype=np.float64),
        np.arange(sensor.image_height, dtype=np.float64),
    )
    pixels = np.stack([cols.ravel(), rows.ravel()], axis=-1)
    res = mount.apply(sensor.backproject(pixels))
    res.setflags(write=False)
    return res


def sensor_raster(sensor: SensorModel, data: np.ndarray) -> RasterImage:
    corner = sensor.backproject(np.zeros((1, 2)))[0]
    return RasterImage.binary(
        data,
        scale=sensor.pixel_pitch_x,
        origin=Point3mm.from_array(corner, frame=Frame.sensor),
    )


def press(
    scene: CrackScene,
    pose: ContactPose,
    sensor: SensorModel,
    mount: Optional[RigidTransform] = None,
) -> TactileFrame:
    """Press the sensor onto the plate at `pose` and record the groove footprint.

    The arm stops when the elastomer meets the plate, so the recorded pose sits
    at the plate top whatever height was planned.
    """
    if mount is None:
        mount = default_mount(sensor)
    p = pose.position
    if not scene.contains_xy(p.x, p.y):
        raise OffSurfaceError(
            f"Contact ({p.x:.3f}, {p.y:.3f}) is off the "
            f"{scene.plate_width}x{scene.plate_height} mm plate"
        )

    realised = pose.model_copy(
        update={"position": Point3mm(x=p.x, y=p.y, z=scene.top_z)}
    )
    shape = (sensor.image_height, sensor.image_width)
    center = np.array([[p.x, p.y]])
    reach = sensor.footprint_radius
    nearby = [
        crack
        for crack in scene.real_cracks()
        if polyline_distances(center, [crack.vertices()[:, :2]])[0]
        <= reach + crack.radius
    ]
    if not nearby:
        image = sensor_raster(sensor, np.zeros(shape, dtype=bool))
        return TactileFrame.from_image(realised, image, edge_id=pose.source_edge)

    tew = end_effector_to_world(realised.position.as_array(), realised.yaw)
    world = tew.apply(_sensor_grid(sensor, mount))
    crack = crack_coverage(world[:, :2], nearby).reshape(shape)
    image = sensor_raster(sensor, crack)
    return TactileFrame.from_image(realised, image, edge_id=pose.source_edge)


def detect_tactile_crack(
    image: RasterImage, cfg: Optional[SegmenterConfig] = None
) -> RasterImage:
    """Crack mask of a tactile image.

    Simulated frames are already binary and pass through; grayscale frames from
    a real sensor go through the threshold segmenter.
    """
    if image.kind == RasterKind.binary:
        return image
    return segment_baseline(image, cfg or SegmenterConfig())


def collect_frames(
    scene: CrackScene,
    plan: TouchPlan,
    sensor: SensorModel,
    mount: Optional[RigidTransform] = None,
    quiet: bool = True,
) -> List[TactileFrame]:
    res = []
    for pose in tqdm.tqdm(plan.contacts, desc="Pressing", disable=quiet):
        res.append(press(scene, pose, sensor, mount=mount))
    return res


def reject_false_edges(
    frames: Iterable[TactileFrame], cfg: RejectionConfig
) -> Set[int]:
    """Edges with at least `min_low_frames` frames below the area threshold.

    The rule is applied per edge; frames without an edge tag are ignored.
    """
    low: Dict[int, int] = {}
    for frame in frames:
        if frame.edge_id is None:
            continue
        low.setdefault(frame.edge_id, 0)
        if frame.crack_area_fraction < cfg.area_threshold:
            low[frame.edge_id] += 1

    res = {edge for edge, count in low.items() if count >= cfg.min_low_frames}
    if res:
        logging.info(f"Rejected {len(res)} edge(s) as painted: {sorted(res)}")
    return res


def refine_visual_mask(
    mask: RasterImage, graph: SkeletonGraph, rejected: Set[int]
) -> RasterImage:
    """Remove vision-mask pixels explained only by rejected skeleton edges.

    Each mask pixel is attributed to its nearest skeleton pixel; it is dropped
    when every edge through that skeleton pixel was rejected.
    """
    check_same_shape(mask, graph.skeleton)
    skeleton = graph.skeleton.data
    if not rejected or not skeleton.any():
        return mask.with_data(mask.data.copy())

    drop_at = np.zeros(skeleton.shape, dtype=bool)
    for (r, c), owners in graph.edges_by_pixel().items():
        if all(owner in rejected for owner in owners):
            drop_at[r, c] = True

    _, (rows, cols) = scipy.ndimage.distance_transform_edt(
        ~skeleton, return_indices=True
    )
    return mask.with_data(mask.data & ~drop_at[rows, cols])


def save_frame(frame: TactileFrame, path: str):
    extra = {
        "pose": frame.pose.model_dump(mode="json"),
        "edge_id": frame.edge_id,
        "crack_area_fraction": frame.crack_area_fraction,
    }
    save_raster(frame.image, path, extra=extra)


def load_frame(path: str) -> TactileFrame:
    image, sidecar = load_raster(path)
    return TactileFrame(
        pose=ContactPose.model_validate(sidecar.extra["pose"]),
        image=image,
        crack_area_fraction=sidecar.extra["crack_area_fraction"],
        edge_id=sidecar.extra.get("edge_id"),
    )


FRAME_PATTERN = "frame-{idx:04d}.pgm"


def frame_name(idx: int) -> str:
    return FRAME_PATTERN.format(idx=idx)


def load_frames(directory: str) -> List[TactileFrame]:
    """Every `frame-NNNN.pgm` under `directory`, in index order."""
    paths = sorted(glob.glob(os.path.join(directory, "frame-*.pgm")))
    logging.info(f"Loading {len(paths)} tactile frames from {directory}")
    return [load_frame(path) for path in paths]
