import numpy as np
import pytest
from common import random_transform
from pydantic import ValidationError

from crackkit.common import (
    DimensionMismatchError,
    NoReconstructionError,
    polyline_distances,
)
from crackkit.evaluation import (
    DetectionMetrics,
    EvaluationConfig,
    ReconMetrics,
    detection_metrics,
    distance_metrics,
    iou,
    pixacc,
    shortest_distances,
    timing_model,
)
from crackkit.geometry import Point3mm
from crackkit.planner import ContactPose, TouchPlan
from crackkit.raster import RasterImage
from crackkit.reconstruction import ReconstructedProfile, ReconstructionMethod


def profile_of(points) -> ReconstructedProfile:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return ReconstructedProfile(
        method=ReconstructionMethod.vision,
        points=points,
        frame_ids=np.full(points.shape[0], -1),
        pixels=np.zeros((points.shape[0], 2)),
    )


def point_to_segment(p, a, b):
    """Closest-point distance by projection, one segment at a time."""
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def plan_at(*xs: float) -> TouchPlan:
    return TouchPlan(
        contacts=tuple(
            ContactPose(position=Point3mm(x=x, y=0.0, z=0.0)) for x in xs
        )
    )


class TestDetection:
    def test_identical(self):
        mask = RasterImage.binary(np.eye(10, dtype=bool))
        assert detection_metrics(mask, mask) == DetectionMetrics(pix_acc=1.0, iou=1.0)

    def test_disjoint_tenth_each(self):
        pred = np.zeros((10, 10), dtype=bool)
        gt = np.zeros((10, 10), dtype=bool)
        pred[0] = True
        gt[9] = True
        a, b = RasterImage.binary(pred), RasterImage.binary(gt)
        assert iou(a, b) == 0.0
        assert pixacc(a, b) == pytest.approx(0.8)

    def test_both_empty(self):
        empty = RasterImage.binary(np.zeros((4, 4), dtype=bool))
        assert iou(empty, empty) == 1.0
        assert pixacc(empty, empty) == 1.0

    def test_partial_overlap(self):
        pred = RasterImage.binary(np.array([[1, 1, 0, 0]]))
        gt = RasterImage.binary(np.array([[0, 1, 1, 0]]))
        assert iou(pred, gt) == pytest.approx(1 / 3)
        assert pixacc(pred, gt) == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            iou(
                RasterImage.binary(np.zeros((2, 2))),
                RasterImage.binary(np.zeros((2, 3))),
            )

    def test_metric_range(self):
        with pytest.raises(ValidationError):
            DetectionMetrics(pix_acc=1.2, iou=0.5)

    def test_iou_symmetric_and_pixacc_complement(self):
        rng = np.random.default_rng(5)
        for density in (0.0, 0.05, 0.3, 0.7):
            pred = RasterImage.binary(rng.random((24, 32)) < density)
            gt = RasterImage.binary(rng.random((24, 32)) < 0.2)
            assert iou(pred, gt) == iou(gt, pred)
            flipped_pred = pred.with_data(~pred.data)
            flipped_gt = gt.with_data(~gt.data)
            assert pixacc(flipped_pred, flipped_gt) == pixacc(pred, gt)


class TestShortestDistances:
    def test_matches_per_segment_oracle(self):
        rng = np.random.default_rng(9)
        lines = [rng.uniform(0, 50, size=(n, 3)) for n in (2, 5, 9)]
        points = rng.uniform(-10, 60, size=(300, 3))
        expected = [
            min(
                point_to_segment(p, line[i], line[i + 1])
                for line in lines
                for i in range(len(line) - 1)
            )
            for p in points
        ]
        res = polyline_distances(points, lines, chunk_size=64)
        assert res == pytest.approx(expected, abs=1e-9)

    def test_single_point_one_mm_off(self):
        truth = [np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])]
        metrics = distance_metrics(profile_of([5.0, 1.0, 0.0]), truth)
        assert metrics.mean_d == pytest.approx(1.0)
        assert metrics.max_d == pytest.approx(1.0)
        assert metrics.sd == 0.0

    def test_population_sd(self):
        truth = [np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])]
        metrics = distance_metrics(
            profile_of([[2.0, 1.0, 0.0], [4.0, 3.0, 0.0]]), truth
        )
        assert metrics.mean_d == pytest.approx(2.0)
        assert metrics.sd == pytest.approx(1.0)
        assert metrics.max_d == pytest.approx(3.0)

    def test_degenerate_segment(self):
        truth = [np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]])]
        res = shortest_distances(profile_of([1.0, 1.0, 3.0]), truth)
        assert res.tolist() == pytest.approx([2.0])

    def test_symmetric_adds_reverse_direction(self):
        truth = [np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])]
        one_sided = shortest_distances(profile_of([0.0, 0.0, 0.0]), truth)
        assert one_sided.tolist() == [0.0]
        both = shortest_distances(profile_of([0.0, 0.0, 0.0]), truth, symmetric=True)
        assert both.max() == pytest.approx(10.0)

    def test_empty_profile(self):
        truth = [np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])]
        with pytest.raises(NoReconstructionError):
            empty = ReconstructedProfile.empty(ReconstructionMethod.vision)
            distance_metrics(empty, truth)

    def test_no_truth(self):
        with pytest.raises(NoReconstructionError):
            distance_metrics(profile_of([1.0, 2.0, 3.0]), [])

    def test_recon_metrics_ordering(self):
        with pytest.raises(ValidationError):
            ReconMetrics(mean_d=2.0, sd=0.0, max_d=1.0)

    @pytest.mark.parametrize("symmetric", [False, True])
    def test_invariant_under_rigid_motion(self, symmetric):
        rng = np.random.default_rng(11)
        for _ in range(20):
            truth = [rng.uniform(0, 50, size=(n, 3)) for n in (3, 6)]
            points = rng.uniform(-5, 55, size=(40, 3))
            t = random_transform(rng)
            before = distance_metrics(profile_of(points), truth, symmetric=symmetric)
            moved = [t.apply(line) for line in truth]
            after = distance_metrics(
                profile_of(t.apply(points)), moved, symmetric=symmetric
            )
            assert after.mean_d == pytest.approx(before.mean_d, abs=1e-9)
            assert after.sd == pytest.approx(before.sd, abs=1e-9)
            assert after.max_d == pytest.approx(before.max_d, abs=1e-9)


class TestTiming:
    def test_empty_plan(self):
        assert timing_model(TouchPlan()) == 0.0

    def test_touches_without_travel(self):
        plan = plan_at(*[5.0] * 10)
        assert timing_model(plan, per_touch_s=1.0) == pytest.approx(10.0)

    def test_travel(self):
        plan = plan_at(0.0, 50.0, 100.0)
        assert timing_model(plan, per_touch_s=1.0, travel_mm_per_s=50.0) == 5.0

    def test_rates_must_be_positive(self):
        with pytest.raises(ValueError):
            timing_model(TouchPlan(), per_touch_s=0.0)
        with pytest.raises(ValidationError):
            EvaluationConfig(travel_mm_per_s=-1.0)

    def test_truth_mode(self):
        with pytest.raises(ValidationError):
            EvaluationConfig(truth_mode="surface")
