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
Synthetic cracked plates and their overhead renders.

The world frame is the plate frame: x along the plate width, y along its
height, z up with the top surface at `plate_thickness`. Cracks are polylines on
the top surface; real cracks are grooves, painted cracks only change albedo.
"""

import enum
import logging
import math
import os
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from crackkit.common import (
    SceneGenerationError,
    polyline_distances,
    segment_distances,
)
from crackkit.geometry import Point3mm
from crackkit.raster import RasterImage

# independent noise streams per raster type
_TOP_VIEW_STREAM = 1
_DEPTH_STREAM = 2


class CrackKind(str, enum.Enum):
    real = "real"
    painted = "painted"


class CrackPath(BaseModel, frozen=True):
    polyline: Tuple[Point3mm, ...]
    width: float
    kind: CrackKind = CrackKind.real
    depth: float = 0.0

    @model_validator(mode="after")
    def _validate(self):
        if len(self.polyline) < 2:
            raise ValueError("crack polyline needs at least two points")
        for a, b in zip(self.polyline[:-1], self.polyline[1:]):
            if (a.x, a.y) == (b.x, b.y):
                raise ValueError("consecutive crack points must be distinct")
        if not self.width > 0:
            raise ValueError("crack width must be positive")
        if self.kind == CrackKind.real and not self.depth > 0:
            raise ValueError("real cracks need a positive groove depth")
        if self.kind == CrackKind.painted and self.depth != 0:
            raise ValueError("painted cracks have zero depth")
        return self

    @property
    def radius(self) -> float:
        return self.width / 2.0

    def vertices(self) -> np.ndarray:
        return np.array([[p.x, p.y, p.z] for p in self.polyline], dtype=np.float64)

    def length(self) -> float:
        v = self.vertices()
        return float(np.linalg.norm(np.diff(v[:, :2], axis=0), axis=1).sum())

    def boundary(self, z: float, arc_points: int = 9) -> List[np.ndarray]:
        """Outline of the groove mouth as a set of polylines at height `z`.

        Offset segments on both sides, semicircular end caps and round joins on
        the convex side of every bend.
        """
        xy = self.vertices()[:, :2]
        r = self.radius
        dirs = np.diff(xy, axis=0)
        headings = np.arctan2(dirs[:, 1], dirs[:, 0])
        res = []

        for idx, phi in enumerate(headings):
            normal = np.array([-math.sin(phi), math.cos(phi)])
            for side in (1.0, -1.0):
                a = xy[idx] + side * r * normal
                b = xy[idx + 1] + side * r * normal
                res.append(np.array([a, b]))

        start, end = headings[0], headings[-1]
        res.append(
            _arc(xy[0], r, start + math.pi / 2, start + 1.5 * math.pi, arc_points)
        )
        res.append(_arc(xy[-1], r, end - math.pi / 2, end + math.pi / 2, arc_points))

        for idx in range(1, len(headings)):
            phi1, phi2 = headings[idx - 1], headings[idx]
            turn = math.atan2(math.sin(phi2 - phi1), math.cos(phi2 - phi1))
            if abs(turn) < 1e-12:
                continue
            # convex side is right of a left turn and left of a right turn
            offset = -math.pi / 2 if turn > 0 else math.pi / 2
            res.append(
                _arc(xy[idx], r, phi1 + offset, phi1 + turn + offset, arc_points)
            )

        return [np.column_stack([line, np.full(line.shape[0], z)]) for line in res]


def _arc(center: np.ndarray, r: float, a0: float, a1: float, n: int) -> np.ndarray:
    angles = np.linspace(a0, a1, n)
    return center + r * np.stack([np.cos(angles), np.sin(angles)], axis=-1)


class CrackScene(BaseModel, frozen=True):
    plate_width: float = 140.0
    plate_height: float = 105.0
    plate_thickness: float = 10.0
    cracks: Tuple[CrackPath, ...] = ()
    background_albedo: float = 0.8
    crack_albedo: float = 0.15
    paint_albedo: float = 0.15
    rng_seed: int = 0

    @field_validator("background_albedo", "crack_albedo", "paint_albedo")
    @classmethod
    def _albedo_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("albedo must lie in [0, 1]")
        return value

    @model_validator(mode="after")
    def _cracks_on_plate(self):
        for crack in self.cracks:
            for p in crack.polyline:
                if not (
                    0.0 <= p.x <= self.plate_width and 0.0 <= p.y <= self.plate_height
                ):
                    raise ValueError(
                        f"crack point ({p.x}, {p.y}) lies outside the plate"
                    )
        return self

    @property
    def top_z(self) -> float:
        return self.plate_thickness

    def real_cracks(self) -> List[CrackPath]:
        return [c for c in self.cracks if c.kind == CrackKind.real]

    def painted_cracks(self) -> List[CrackPath]:
        return [c for c in self.cracks if c.kind == CrackKind.painted]

    def contains_xy(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.plate_width and 0.0 <= y <= self.plate_height

    def truth_polylines(self, mode: str = "boundary") -> List[np.ndarray]:
        """Ground truth crack shape for distance scoring (real cracks only)."""
        res = []
        for crack in self.real_cracks():
            if mode == "boundary":
                res.extend(crack.boundary(self.top_z))
            elif mode == "centerline":
                v = crack.vertices()
                v[:, 2] = self.top_z
                res.append(v)
            else:
                raise RuntimeError(f"Unknown truth mode {mode}")
        return res


class SceneParameters(BaseModel, frozen=True):
    n_real: int = 2
    n_fake: int = 1
    width_range: Tuple[float, float] = (1.2, 2.5)
    depth_range: Tuple[float, float] = (1.0, 3.0)
    length_range: Tuple[float, float] = (6.0, 16.0)
    plate_width: float = 140.0
    plate_height: float = 105.0
    plate_thickness: float = 10.0
    step_mm: float = 2.0
    turn_sigma: float = 0.2
    max_turn: float = 0.35
    margin_mm: float = 8.0
    clearance_mm: float = 15.0
    max_attempts: int = 1000

    @model_validator(mode="after")
    def _validate(self):
        if self.n_real < 0 or self.n_fake < 0:
            raise ValueError("crack counts must be non-negative")
        for name in ("width_range", "depth_range", "length_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must be a positive (low, high) range")
        if min(self.plate_width, self.plate_height, self.plate_thickness) <= 0:
            raise ValueError("plate dimensions must be positive")
        if self.depth_range[1] >= self.plate_thickness:
            raise ValueError("grooves cannot be deeper than the plate")
        return self


def generate_random_scene(seed: int, params: SceneParameters) -> CrackScene:
    """Place `n_real` grooves and `n_fake` painted marks as random walks."""
    rng = np.random.default_rng(seed)
    kinds = [CrackKind.real] * params.n_real + [CrackKind.painted] * params.n_fake
    placed: List[CrackPath] = []
    attempts = 0

    for kind in kinds:
        while True:
            attempts += 1
            if attempts > params.max_attempts:
                raise SceneGenerationError(
                    f"Could not fit {params.n_real} real and {params.n_fake} painted "
                    f"cracks on a {params.plate_width}x{params.plate_height} mm plate "
                    f"after {params.max_attempts} placement attempts"
                )
            candidate = _random_walk(rng, kind, params)
            if candidate is not None and _has_clearance(
                candidate, placed, params.clearance_mm
            ):
                placed.append(candidate)
                break

    logging.debug(f"Placed {len(placed)} cracks in {attempts} attempts (seed {seed})")
    return CrackScene(
        plate_width=params.plate_width,
        plate_height=params.plate_height,
        plate_thickness=params.plate_thickness,
        cracks=tuple(placed),
        rng_seed=seed,
    )


def _random_walk(rng: np.random.Generator, kind: CrackKind, params: SceneParameters):
    length = rng.uniform(*params.length_range)
    width = rng.uniform(*params.width_range)
    depth = rng.uniform(*params.depth_range) if kind == CrackKind.real else 0.0

    n_seg = max(1, int(math.ceil(length / params.step_mm)))
    seg_len = length / n_seg
    heading = rng.uniform(0.0, 2.0 * math.pi)
    m = params.margin_mm
    point = np.array(
        [
            rng.uniform(m, params.plate_width - m),
            rng.uniform(m, params.plate_height - m),
        ]
    )
    points = [point]
    for _ in range(n_seg):
        point = point + seg_len * np.array([math.cos(heading), math.sin(heading)])
        points.append(point)
        turn = rng.normal(0.0, params.turn_sigma)
        heading += float(np.clip(turn, -params.max_turn, params.max_turn))

    xy = np.array(points)
    if (
        xy[:, 0].min() < m
        or xy[:, 0].max() > params.plate_width - m
        or xy[:, 1].min() < m
        or xy[:, 1].max() > params.plate_height - m
    ):
        return None

    return CrackPath(
        polyline=tuple(
            Point3mm(x=float(x), y=float(y), z=params.plate_thickness) for x, y in xy
        ),
        width=float(width),
        kind=kind,
        depth=float(depth),
    )


def _has_clearance(
    candidate: CrackPath, placed: Sequence[CrackPath], clearance: float
) -> bool:
    if not placed:
        return True
    samples = _densify(candidate.vertices()[:, :2], 0.5)
    others = [c.vertices()[:, :2] for c in placed]
    if polyline_distances(samples, others).min() < clearance:
        return False
    own = [candidate.vertices()[:, :2]]
    for other in others:
        if polyline_distances(_densify(other, 0.5), own).min() < clearance:
            return False
    return True


def _densify(xy: np.ndarray, spacing: float) -> np.ndarray:
    res = [xy[:1]]
    for a, b in zip(xy[:-1], xy[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.linspace(0.0, 1.0, n + 1)[1:, None]
        res.append(a + t * (b - a))
    return np.concatenate(res)


def _plate_raster_geometry(
    scene: CrackScene, mm_per_px: float
) -> Tuple[int, int, Point3mm]:
    if not mm_per_px > 0:
        raise ValueError("mm_per_px must be positive")
    width = max(1, int(round(scene.plate_width / mm_per_px)))
    height = max(1, int(round(scene.plate_height / mm_per_px)))
    origin = Point3mm(x=mm_per_px / 2.0, y=mm_per_px / 2.0, z=scene.top_z)
    return width, height, origin


def crack_coverage(xy: np.ndarray, cracks: Sequence[CrackPath]) -> np.ndarray:
    """True where a planar point lies within half a crack width of its path.

    `xy` has shape (..., 2). Segments far from every point are skipped.
    """
    flat = xy.reshape(-1, 2)
    res = np.zeros(flat.shape[0], dtype=bool)
    if flat.shape[0] == 0:
        return res.reshape(xy.shape[:-1])
    lo = flat.min(axis=0)
    hi = flat.max(axis=0)
    for crack in cracks:
        r = crack.radius
        v = crack.vertices()[:, :2]
        for a, b in zip(v[:-1], v[1:]):
            seg_lo = np.minimum(a, b) - r
            seg_hi = np.maximum(a, b) + r
            if np.any(seg_hi < lo) or np.any(seg_lo > hi):
                continue
            near = (
                (flat[:, 0] >= seg_lo[0])
                & (flat[:, 0] <= seg_hi[0])
                & (flat[:, 1] >= seg_lo[1])
                & (flat[:, 1] <= seg_hi[1])
            )
            idx = np.flatnonzero(near & ~res)
            if idx.size == 0:
                continue
            res[idx] = segment_distances(flat[idx], a, b) <= r
    return res.reshape(xy.shape[:-1])


def render_top_view(
    scene: CrackScene, mm_per_px: float, noise_sigma: float = 0.0
) -> RasterImage:
    """Grayscale overhead image; painted and real cracks are both dark."""
    width, height, origin = _plate_raster_geometry(scene, mm_per_px)
    image = np.full((height, width), scene.background_albedo, dtype=np.float64)
    blank = RasterImage.grayscale(image, scale=mm_per_px, origin=origin)
    centers = blank.pixel_centers()

    painted = crack_coverage(centers, scene.painted_cracks())
    real = crack_coverage(centers, scene.real_cracks())
    image[painted] = scene.paint_albedo
    image[real] = scene.crack_albedo

    if noise_sigma > 0:
        rng = np.random.default_rng([scene.rng_seed, _TOP_VIEW_STREAM])
        image = np.clip(image + rng.normal(0.0, noise_sigma, image.shape), 0.0, 1.0)
    return blank.with_data(image)


def render_depth(
    scene: CrackScene, mm_per_px: float, noise_sigma: float = 0.0
) -> RasterImage:
    """Surface height map (mm). Painted cracks leave it untouched."""
    width, height, origin = _plate_raster_geometry(scene, mm_per_px)
    depth = np.full((height, width), scene.top_z, dtype=np.float64)
    blank = RasterImage.grayscale(depth, scale=mm_per_px, origin=origin)
    centers = blank.pixel_centers()

    # deepest groove wins where grooves overlap
    for crack in sorted(scene.real_cracks(), key=lambda c: c.depth):
        covered = crack_coverage(centers, [crack])
        depth[covered] = scene.top_z - crack.depth

    if noise_sigma > 0:
        rng = np.random.default_rng([scene.rng_seed, _DEPTH_STREAM])
        depth = depth + rng.normal(0.0, noise_sigma, depth.shape)
    return blank.with_data(depth)


def ground_truth_mask(
    scene: CrackScene, mm_per_px: float, include_painted: bool = False
) -> RasterImage:
    width, height, origin = _plate_raster_geometry(scene, mm_per_px)
    blank = RasterImage.binary(
        np.zeros((height, width), dtype=bool), scale=mm_per_px, origin=origin
    )
    cracks = scene.cracks if include_painted else scene.real_cracks()
    return blank.with_data(crack_coverage(blank.pixel_centers(), cracks))


def save_scene(scene: CrackScene, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(scene.model_dump_json(indent=2))


def load_scene(path: str) -> CrackScene:
    with open(path, "r", encoding="utf-8") as fp:
        return CrackScene.model_validate_json(fp.read())
