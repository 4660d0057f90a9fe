import json
import math
import os

import numpy as np
import pytest
from common import noiseless_config

from crackkit.benchmark import run_benchmark, summarize, write_benchmark
from crackkit.config import PipelineConfig, with_overrides
from crackkit.evaluation import EvaluationConfig
from crackkit.io.artifact_writer import ArtifactWriter
from crackkit.pipeline import (
    METHOD_ORDER,
    REPORT_COLUMNS,
    evaluate_scene,
    run_pipeline,
    run_scene,
)
from crackkit.reconstruction import ReconstructionMethod
from crackkit.report import chain_points, render_overlay
from crackkit.scene import SceneParameters


@pytest.fixture(scope="module")
def benchmark():
    return run_benchmark(PipelineConfig(), quiet=True)


class TestRunScene:
    def test_report_shape(self):
        config = PipelineConfig(seed=3)
        result = run_scene(config)
        report = evaluate_scene(result, config)
        assert list(report.columns) == REPORT_COLUMNS
        assert report["method"].tolist() == [m.value for m in METHOD_ORDER]
        assert set(report["seed"]) == {3}

        passive = report.set_index("method").loc["passive-tactile"]
        assert math.isnan(passive["iou"])
        assert passive["n_touches"] == result.passive_plan.n_touches == 100

    def test_refined_mask_is_subset(self):
        result = run_scene(PipelineConfig(seed=5))
        assert not np.any(result.refined_mask.data & ~result.vision_mask.data)
        assert len(result.frames) == result.plan.n_touches

    def test_rejects_painted_edges(self):
        config = noiseless_config()
        result = run_scene(config)
        assert result.scene.painted_cracks()
        assert result.rejected
        painted = [c.vertices()[:, :2] for c in result.scene.painted_cracks()]
        for edge_id in result.rejected:
            for contact in result.plan.by_edge()[edge_id]:
                p = contact.position
                nearest = min(
                    np.linalg.norm(line - [p.x, p.y], axis=1).min() for line in painted
                )
                # within the mark's width plus a few vertex spacings
                assert nearest < 5.0

    def test_blank_scene_reports_missing_values(self):
        config = PipelineConfig(scene=SceneParameters(n_real=0, n_fake=0))
        result = run_scene(config)
        report = evaluate_scene(result, config)
        assert report["mean_d"].isna().all()
        assert result.plan.n_touches == 0
        vision = report.set_index("method").loc["vision"]
        assert vision["iou"] == 1.0 and vision["pix_acc"] == 1.0


class TestRunPipeline:
    def test_artifact_tree(self, tmp_path):
        out = str(tmp_path / "run")
        report = run_pipeline(PipelineConfig(out_dir=out), quiet=True)
        assert len(report) == 4

        with open(os.path.join(out, "manifest.json"), "r", encoding="utf-8") as fp:
            artifacts = json.load(fp)["artifacts"]
        assert artifacts == sorted(artifacts)
        for name in [
            "scenes/scene.json",
            "scenes/top_view.pgm",
            "masks/vision_mask.pgm",
            "masks/graph.json",
            "frames/plan.json",
            "frames/frame-0000.pgm",
            "frames/frame-0000.pgm.json",
            "frames/rejected_edges.json",
            "profiles/active-tactile.csv",
            "profiles/vision.ply",
            "reports/report.csv",
            "reports/overlay.svg",
        ]:
            assert name in artifacts
            assert os.path.exists(os.path.join(out, *name.split("/")))

    def test_report_is_byte_identical(self, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            run_pipeline(PipelineConfig(seed=2, out_dir=out), quiet=True)
            with open(os.path.join(out, "reports", "report.csv"), "rb") as fp:
                blobs.append(fp.read())
        assert blobs[0] == blobs[1]


class TestOverlay:
    def test_layers(self):
        result = run_scene(noiseless_config())
        svg = render_overlay(result.scene, result.profiles)
        assert svg.startswith("<?xml")
        assert '<g id="truth"' in svg
        assert '<g id="active-tactile"' in svg
        assert '<g id="vision"' not in svg

    def test_chain_points_splits_far_groups(self):
        points = np.array([[0.0, 0.0], [0.5, 0.0], [10.0, 0.0], [10.5, 0.0]])
        lines = chain_points(points, max_link=2.0)
        assert [len(line) for line in lines] == [2, 2]
        assert chain_points(np.zeros((0, 2))) == []


class TestBenchmark:
    def test_one_row_per_scene_and_method(self, benchmark):
        table = benchmark.table
        assert len(table) == 20 * 4
        assert table["seed"].tolist()[::4] == list(range(20))

    def test_reconstruction_ordering(self, benchmark):
        means = benchmark.summary["means"]
        assert benchmark.summary["ordering_pass"]
        assert means[ReconstructionMethod.active_tactile.value]["mean_d"] <= 0.1
        assert means[ReconstructionMethod.vision.value]["mean_d"] >= 0.3

    def test_detection_refinement(self, benchmark):
        assert benchmark.summary["refinement_wins"] >= 19
        assert benchmark.summary["max_pix_acc_drop"] <= 0.01

    def test_touch_ratio(self, benchmark):
        assert benchmark.summary["min_touch_ratio"] >= 10
        assert benchmark.summary["mean_touch_ratio"] >= 10

    def test_reconstruction_scored_without_fakes(self, benchmark):
        config = PipelineConfig()
        clean = with_overrides(config, {"scene.n_fake": 0})
        expected = evaluate_scene(run_scene(clean, seed=3), clean)
        painted = evaluate_scene(run_scene(config, seed=3), config)
        rows = benchmark.table[benchmark.table["seed"] == 3].reset_index(drop=True)

        recon = ["mean_d", "sd", "max_d"]
        assert np.allclose(rows[recon], expected[recon], equal_nan=True)
        detection = ["pix_acc", "iou", "n_touches"]
        assert np.allclose(rows[detection], painted[detection], equal_nan=True)

    def test_reconstruction_with_fakes_on_request(self):
        config = PipelineConfig(
            evaluation=EvaluationConfig(fake_free_reconstruction=False)
        )
        table = run_benchmark(config, seeds=[3], quiet=True).table
        expected = evaluate_scene(run_scene(config, seed=3), config)
        assert np.allclose(table["mean_d"], expected["mean_d"], equal_nan=True)

    def test_summary_is_recomputable(self, benchmark):
        assert summarize(benchmark.table) == benchmark.summary

    def test_written_reports(self, benchmark, tmp_path):
        writer = ArtifactWriter(str(tmp_path))
        write_benchmark(benchmark, writer)
        writer.finalize()
        for name in ("benchmark.csv", "summary.csv", "summary.json"):
            assert os.path.exists(tmp_path / "reports" / name)
        with open(tmp_path / "reports" / "summary.json", "r", encoding="utf-8") as fp:
            assert json.load(fp)["n_scenes"] == 20
