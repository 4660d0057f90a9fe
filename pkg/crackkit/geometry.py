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
Rigid transforms, camera intrinsics and the tactile sensor's projective model.

All lengths are millimetres. The tactile sensor is modelled as a pinhole camera
looking at a flat elastomer plane at distance `standoff` along its optical axis.
"""

import enum
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, field_validator, model_validator
from typing_extensions import TypeAlias

from crackkit.common import FrameMismatchError, NonProjectablePointError

Vector3: TypeAlias = Tuple[float, float, float]
Matrix3: TypeAlias = Tuple[Vector3, Vector3, Vector3]

_IDENTITY: Matrix3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


class Frame(str, enum.Enum):
    sensor = "sensor"
    end_effector = "end_effector"
    world = "world"


class Point2Px(BaseModel, frozen=True):
    """Continuous pixel coordinate: `u` is the column, `v` the row."""

    u: float
    v: float

    @field_validator("u", "v")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("pixel coordinates must be finite")
        return value

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v], dtype=np.float64)


class Point3mm(BaseModel, frozen=True):
    x: float
    y: float
    z: float
    frame: Frame = Frame.world

    @field_validator("x", "y", "z")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("point coordinates must be finite")
        return value

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, value: np.ndarray, frame: Frame = Frame.world) -> "Point3mm":
        return cls(x=float(value[0]), y=float(value[1]), z=float(value[2]), frame=frame)


class RigidTransform(BaseModel, frozen=True):
    """Maps points expressed in `from_frame` into `to_frame`.

    The rotation is stored row-major. Frame tags are optional; when given they are
    checked on application and composition.
    """

    rotation: Matrix3 = _IDENTITY
    translation: Vector3 = (0.0, 0.0, 0.0)
    from_frame: Optional[Frame] = None
    to_frame: Optional[Frame] = None

    @model_validator(mode="after")
    def _check_rotation(self):
        r = np.array(self.rotation, dtype=np.float64)
        if not np.all(np.isfinite(r)) or not all(
            math.isfinite(t) for t in self.translation
        ):
            raise ValueError("transform entries must be finite")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        return self

    @classmethod
    def identity(cls, **kwargs) -> "RigidTransform":
        return cls(**kwargs)

    @classmethod
    def from_translation(
        cls, x: float, y: float, z: float, **kwargs
    ) -> "RigidTransform":
        return cls(translation=(float(x), float(y), float(z)), **kwargs)

    @classmethod
    def from_matrix(
        cls, rotation: np.ndarray, translation: np.ndarray, **kwargs
    ) -> "RigidTransform":
        rot = tuple(tuple(float(e) for e in row) for row in np.asarray(rotation))
        trans = tuple(float(e) for e in np.asarray(translation).reshape(3))
        return cls(rotation=rot, translation=trans, **kwargs)

    @classmethod
    def about_z(cls, angle: float, **kwargs) -> "RigidTransform":
        c, s = math.cos(angle), math.sin(angle)
        return cls.from_matrix(
            np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]),
            np.zeros(3),
            **kwargs,
        )

    def rotation_matrix(self) -> np.ndarray:
        return np.array(self.rotation, dtype=np.float64)

    def translation_vector(self) -> np.ndarray:
        return np.array(self.translation, dtype=np.float64)

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 form."""
        res = np.eye(4)
        res[:3, :3] = self.rotation_matrix()
        res[:3, 3] = self.translation_vector()
        return res

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (N, 3) array or a single (3,) vector."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation_matrix().T + self.translation_vector()


def compose(t1: RigidTransform, t2: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying `t2` first and then `t1`."""
    if t1.from_frame and t2.to_frame and t1.from_frame != t2.to_frame:
        raise FrameMismatchError(
            f"Cannot compose {t2.to_frame.value} output "
            f"with {t1.from_frame.value} input"
        )
    r1 = t1.rotation_matrix()
    return RigidTransform.from_matrix(
        r1 @ t2.rotation_matrix(),
        r1 @ t2.translation_vector() + t1.translation_vector(),
        from_frame=t2.from_frame,
        to_frame=t1.to_frame,
    )


def invert(t: RigidTransform) -> RigidTransform:
    r_t = t.rotation_matrix().T
    return RigidTransform.from_matrix(
        r_t,
        -r_t @ t.translation_vector(),
        from_frame=t.to_frame,
        to_frame=t.from_frame,
    )


def transform_point(p: Point3mm, t: RigidTransform) -> Point3mm:
    if t.from_frame and t.from_frame != p.frame:
        raise FrameMismatchError(
            f"Point is in {p.frame.value} frame, transform expects {t.from_frame.value}"
        )
    return Point3mm.from_array(t.apply(p.as_array()), frame=t.to_frame or p.frame)


def sensor_point_to_world(
    p: Point3mm, tce: RigidTransform, tew: RigidTransform
) -> Point3mm:
    """P_W = T_E^W T_C^E P."""
    res = compose(tew, tce).apply(p.as_array())
    return Point3mm.from_array(res, frame=Frame.world)


class CameraIntrinsics(BaseModel, frozen=True):
    fx: float
    fy: float
    u0: float
    v0: float

    @field_validator("fx", "fy")
    @classmethod
    def _positive_focal(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("focal lengths must be positive")
        return value

    def matrix(self) -> np.ndarray:
        """The 3x4 projection matrix K."""
        return np.array(
            [
                [self.fx, 0.0, self.u0, 0.0],
                [0.0, self.fy, self.v0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ]
        )


class SensorModel(BaseModel, frozen=True):
    """GelSight-style sensor geometry.

    When `intrinsics` is omitted it is derived so that the elastomer plane at
    `standoff` exactly fills the view, with the principal point at the image
    centre (pixel-centre convention).
    """

    view_width: float = 14.0
    view_height: float = 10.5
    image_width: int = 640
    image_height: int = 480
    standoff: float = 20.0
    intrinsics: Optional[CameraIntrinsics] = None

    @model_validator(mode="before")
    @classmethod
    def _default_intrinsics(cls, data):
        if isinstance(data, dict) and data.get("intrinsics") is None:
            defaults = cls.model_fields
            width = data.get("image_width", defaults["image_width"].default)
            height = data.get("image_height", defaults["image_height"].default)
            standoff = data.get("standoff", defaults["standoff"].default)
            view_w = data.get("view_width", defaults["view_width"].default)
            view_h = data.get("view_height", defaults["view_height"].default)
            data = dict(data)
            data["intrinsics"] = {
                "fx": width * standoff / view_w,
                "fy": height * standoff / view_h,
                "u0": (width - 1) / 2.0,
                "v0": (height - 1) / 2.0,
            }
        return data

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("sensor image dimensions must be positive")
        if not (self.standoff > 0 and self.view_width > 0 and self.view_height > 0):
            raise ValueError("sensor standoff and view size must be positive")
        k = self.intrinsics
        if abs(self.image_width * self.standoff / k.fx - self.view_width) > 1e-6:
            raise ValueError("intrinsics fx inconsistent with view_width")
        if abs(self.image_height * self.standoff / k.fy - self.view_height) > 1e-6:
            raise ValueError("intrinsics fy inconsistent with view_height")
        return self

    @property
    def pixel_pitch_x(self) -> float:
        return self.view_width / self.image_width

    @property
    def pixel_pitch_y(self) -> float:
        return self.view_height / self.image_height

    @property
    def footprint_radius(self) -> float:
        return math.hypot(self.view_width, self.view_height) / 2.0

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project (N, 3) sensor-frame points to (N, 2) pixels (u, v)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if np.any(points[:, 2] <= 0):
            raise NonProjectablePointError("points with z <= 0 cannot be projected")
        k = self.intrinsics
        u = k.fx * points[:, 0] / points[:, 2] + k.u0
        v = k.fy * points[:, 1] / points[:, 2] + k.v0
        return np.stack([u, v], axis=-1)

    def backproject(self, pixels: np.ndarray) -> np.ndarray:
        """Lift (N, 2) pixels onto the elastomer plane z = standoff."""
        pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
        k = self.intrinsics
        z = self.standoff
        x = (pixels[:, 0] - k.u0) * z / k.fx
        y = (pixels[:, 1] - k.v0) * z / k.fy
        return np.stack([x, y, np.full_like(x, z)], axis=-1)


def project_sensor_to_image(p: Point3mm, s: SensorModel) -> Point2Px:
    if p.z <= 0:
        raise NonProjectablePointError(
            f"Point at z={p.z} mm is not in front of the camera"
        )
    uv = s.project(p.as_array())[0]
    return Point2Px(u=float(uv[0]), v=float(uv[1]))


def backproject_image_to_sensor(px: Point2Px, s: SensorModel) -> Point3mm:
    xyz = s.backproject(px.as_array())[0]
    return Point3mm.from_array(xyz, frame=Frame.sensor)


def default_mount(sensor: SensorModel) -> RigidTransform:
    """T_C^E placing the end-effector origin at the centre of the elastomer."""
    return RigidTransform.from_translation(
        0.0,
        0.0,
        -sensor.standoff,
        from_frame=Frame.sensor,
        to_frame=Frame.end_effector,
    )


def end_effector_to_world(position: np.ndarray, yaw: float) -> RigidTransform:
    """T_E^W for a tool pressed perpendicular to the plate at `position`.

    The tool z axis points down into the plate and its x axis is the yaw
    direction in the plate plane.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    rotation = np.array([[c, s, 0.0], [s, -c, 0.0], [0.0, 0.0, -1.0]])
    return RigidTransform.from_matrix(
        rotation,
        np.asarray(position, dtype=np.float64),
        from_frame=Frame.end_effector,
        to_frame=Frame.world,
    )
