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
Detection and reconstruction metrics, and the exploration time model.

pixAcc is overall pixel accuracy (not mean per-class accuracy). Reconstruction
distances run from each reconstructed point to the nearest point of the true
crack shape; the symmetric option adds the reverse direction.
"""

import math
from typing import Optional, Sequence

import numpy as np
import scipy.spatial
from pydantic import BaseModel, field_validator, model_validator

from crackkit.common import NoReconstructionError, polyline_distances
from crackkit.planner import TouchPlan
from crackkit.raster import RasterImage, check_same_shape
from crackkit.reconstruction import ReconstructedProfile

# spacing used to sample truth polylines for the reverse Chamfer direction
_TRUTH_SAMPLE_MM = 0.01


class EvaluationConfig(BaseModel, frozen=True):
    truth_mode: str = "boundary"
    symmetric: bool = False
    per_touch_s: float = 1.0
    travel_mm_per_s: float = 50.0
    vision_time_s: float = 1.0
    passive_overlap: float = 0.0
    passive_rotations: int = 1
    # benchmark: score distances on the same seed with painted fakes removed
    fake_free_reconstruction: bool = True

    @field_validator("truth_mode")
    @classmethod
    def _known_mode(cls, value: str) -> str:
        if value not in ("boundary", "centerline"):
            raise ValueError("truth_mode must be 'boundary' or 'centerline'")
        return value

    @field_validator("per_touch_s", "travel_mm_per_s")
    @classmethod
    def _positive_rate(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("timing rates must be positive")
        return value


class DetectionMetrics(BaseModel, frozen=True):
    pix_acc: float
    iou: float

    @model_validator(mode="after")
    def _unit_range(self):
        if not (0.0 <= self.pix_acc <= 1.0 and 0.0 <= self.iou <= 1.0):
            raise ValueError("detection metrics must lie in [0, 1]")
        return self


class ReconMetrics(BaseModel, frozen=True):
    mean_d: float
    sd: float
    max_d: float
    time_s: Optional[float] = None
    n_touches: int = 0

    @model_validator(mode="after")
    def _ordered(self):
        # float summation can put the mean a hair above the max
        if not (0.0 <= self.mean_d <= self.max_d * (1 + 1e-12) + 1e-15):
            raise ValueError("expected 0 <= meanD <= maxD")
        if self.sd < 0:
            raise ValueError("SD must be non-negative")
        return self


def pixacc(pred: RasterImage, gt: RasterImage) -> float:
    check_same_shape(pred, gt)
    if pred.data.size == 0:
        return 1.0
    return float(np.count_nonzero(pred.data == gt.data)) / pred.data.size


def iou(pred: RasterImage, gt: RasterImage) -> float:
    """Crack-class IoU; two empty masks agree perfectly."""
    check_same_shape(pred, gt)
    union = np.count_nonzero(pred.data | gt.data)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(pred.data & gt.data)) / union


def detection_metrics(pred: RasterImage, gt: RasterImage) -> DetectionMetrics:
    return DetectionMetrics(pix_acc=pixacc(pred, gt), iou=iou(pred, gt))


def _sample_polylines(polylines: Sequence[np.ndarray], spacing: float) -> np.ndarray:
    res = []
    for line in polylines:
        line = np.asarray(line, dtype=np.float64).reshape(-1, 3)
        res.append(line[:1])
        for a, b in zip(line[:-1], line[1:]):
            n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
            t = np.linspace(0.0, 1.0, n + 1)[1:, None]
            res.append(a + t * (b - a))
    if not res:
        return np.zeros((0, 3))
    return np.concatenate(res)


def shortest_distances(
    profile: ReconstructedProfile,
    truth: Sequence[np.ndarray],
    symmetric: bool = False,
) -> np.ndarray:
    if len(profile) == 0:
        raise NoReconstructionError(f"{profile.method.value} profile is empty")
    res = polyline_distances(profile.points, truth)
    if symmetric:
        samples = _sample_polylines(truth, _TRUTH_SAMPLE_MM)
        reverse, _ = scipy.spatial.cKDTree(profile.points).query(samples)
        res = np.concatenate([res, reverse])
    return res


def distance_metrics(
    profile: ReconstructedProfile,
    truth: Sequence[np.ndarray],
    symmetric: bool = False,
) -> ReconMetrics:
    """Mean, population SD and max of the shortest distances to the truth."""
    dist = shortest_distances(profile, truth, symmetric=symmetric)
    if not np.all(np.isfinite(dist)):
        raise NoReconstructionError("no ground truth crack to measure against")
    return ReconMetrics(
        mean_d=float(dist.mean()),
        sd=float(dist.std()),
        max_d=float(dist.max()),
    )


def timing_model(
    plan: TouchPlan, per_touch_s: float = 1.0, travel_mm_per_s: float = 50.0
) -> float:
    """Touch time plus travel along the plan's visiting order."""
    if not (per_touch_s > 0 and travel_mm_per_s > 0):
        raise ValueError("timing rates must be positive")
    return plan.n_touches * per_touch_s + plan.tour_length() / travel_mm_per_s
