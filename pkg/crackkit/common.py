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

import math
from typing import Sequence, Tuple

import numpy as np


class NonProjectablePointError(ValueError):
    """Point lies on or behind the camera plane and has no image."""


class SceneGenerationError(RuntimeError):
    """The requested cracks could not be placed on the plate."""


class RasterParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class MissingSidecarError(FileNotFoundError):
    def __init__(self, sidecar_path: str):
        super().__init__(f"Missing raster sidecar {sidecar_path}")
        self.sidecar_path = sidecar_path


class NotASkeletonError(ValueError):
    """Input mask still contains a solid 2x2 block."""


class OffSurfaceError(ValueError):
    """Contact pose lies outside the plate."""


class OutOfBoundsPixelError(IndexError):
    pass


class DimensionMismatchError(ValueError):
    pass


class NoReconstructionError(RuntimeError):
    """A profile has no points to score."""


class FrameMismatchError(ValueError):
    pass


def wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    res = math.remainder(angle, 2.0 * math.pi)
    if res <= -math.pi:
        res += 2.0 * math.pi
    return res


def segment_distances(
    points: np.ndarray, start: np.ndarray, end: np.ndarray
) -> np.ndarray:
    """Euclidean distance from each row of `points` to the segment start-end.

    Works in any dimension; `points` is (N, D), `start`/`end` are (D,).
    """
    seg = end - start
    seg_len_sq = float(np.dot(seg, seg))
    rel = points - start
    if seg_len_sq <= 0.0:
        return np.linalg.norm(rel, axis=-1)
    t = np.clip(rel @ seg / seg_len_sq, 0.0, 1.0)
    closest = start + t[:, None] * seg
    return np.linalg.norm(points - closest, axis=-1)


def polyline_distances(
    points: np.ndarray,
    polylines: Sequence[np.ndarray],
    chunk_size: int = 2048,
) -> np.ndarray:
    """Shortest distance from each point to a set of polylines.

    A polyline with a single vertex is treated as a point.
    """
    points = np.asarray(points, dtype=np.float64)
    res = np.full(points.shape[0], np.inf)
    starts, ends = _segments_of(polylines, points.shape[1])
    if starts.shape[0] == 0:
        return res

    for lo in range(0, points.shape[0], chunk_size):
        chunk = points[lo : lo + chunk_size]
        seg = ends - starts  # (S, D)
        seg_len_sq = np.einsum("sd,sd->s", seg, seg)
        rel = chunk[:, None, :] - starts[None, :, :]  # (N, S, D)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.einsum("nsd,sd->ns", rel, seg) / seg_len_sq[None, :]
        t = np.where(seg_len_sq[None, :] > 0, np.clip(t, 0.0, 1.0), 0.0)
        closest = starts[None, :, :] + t[:, :, None] * seg[None, :, :]
        dist = np.linalg.norm(chunk[:, None, :] - closest, axis=-1)
        res[lo : lo + chunk_size] = dist.min(axis=1)
    return res


def _segments_of(
    polylines: Sequence[np.ndarray], dim: int
) -> Tuple[np.ndarray, np.ndarray]:
    starts = []
    ends = []
    for line in polylines:
        line = np.asarray(line, dtype=np.float64).reshape(-1, dim)
        if line.shape[0] == 1:
            starts.append(line)
            ends.append(line)
        elif line.shape[0] > 1:
            starts.append(line[:-1])
            ends.append(line[1:])
    if not starts:
        return np.zeros((0, dim)), np.zeros((0, dim))
    return np.concatenate(starts), np.concatenate(ends)
