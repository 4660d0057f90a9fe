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

import logging
import math
from typing import Dict, List, Optional, Set

import pandas as pd
from pydantic import BaseModel, ConfigDict

from crackkit.common import NoReconstructionError
from crackkit.config import PipelineConfig
from crackkit.evaluation import (
    DetectionMetrics,
    ReconMetrics,
    detection_metrics,
    distance_metrics,
    timing_model,
)
from crackkit.graph import Executor, Task
from crackkit.io.artifact_writer import ArtifactWriter
from crackkit.io.raster_io import sidecar_path
from crackkit.planner import TouchPlan, save_plan
from crackkit.raster import RasterImage
from crackkit.reconstruction import (
    ReconstructedProfile,
    ReconstructionMethod,
    save_ply,
    save_profile,
)
from crackkit.report import render_overlay
from crackkit.scene import CrackScene
from crackkit.skeleton import SkeletonGraph, save_graph
from crackkit.tactile import TactileFrame, frame_name, save_frame
from crackkit.tasks import (
    ExtractSkeleton,
    GenerateScene,
    GroundTruthMask,
    PassivePlan,
    PlanContacts,
    PressContacts,
    ReconstructAlignedVision,
    ReconstructTactile,
    ReconstructVision,
    RefineMask,
    RejectEdges,
    RenderDepth,
    RenderTopView,
    SegmentImage,
)

REPORT_COLUMNS = [
    "seed",
    "method",
    "pix_acc",
    "iou",
    "mean_d",
    "sd",
    "max_d",
    "time_s",
    "n_touches",
]

METHOD_ORDER = [
    ReconstructionMethod.vision,
    ReconstructionMethod.aligned_vision,
    ReconstructionMethod.passive_tactile,
    ReconstructionMethod.active_tactile,
]


class SceneResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int
    scene: CrackScene
    top_view: RasterImage
    depth: RasterImage
    truth_mask: RasterImage
    vision_mask: RasterImage
    refined_mask: RasterImage
    graph: SkeletonGraph
    plan: TouchPlan
    passive_plan: TouchPlan
    frames: List[TactileFrame]
    passive_frames: List[TactileFrame]
    rejected: Set[int]
    profiles: Dict[ReconstructionMethod, ReconstructedProfile]


def build_scene_tasks(config: PipelineConfig, seed: int) -> Dict[str, Task]:
    """Named targets of the per-scene task graph."""
    tce = config.tce()
    scene = GenerateScene(seed=seed, params=config.scene)
    top_view = RenderTopView(scene=scene, render=config.render)
    depth = RenderDepth(scene=scene, render=config.render)
    mask = SegmentImage(image=top_view, config=config.segmentation)
    graph = ExtractSkeleton(mask=mask, config=config.skeleton)
    plan = PlanContacts(graph=graph, depth=depth, config=config.planner)
    frames = PressContacts(scene=scene, plan=plan, sensor=config.sensor, mount=tce)
    rejected = RejectEdges(frames=frames, config=config.rejection)
    passive_plan = PassivePlan(
        scene=scene, sensor=config.sensor, config=config.evaluation
    )
    passive_frames = PressContacts(
        scene=scene, plan=passive_plan, sensor=config.sensor, mount=tce
    )

    return {
        "scene": scene,
        "top_view": top_view,
        "depth": depth,
        "truth_mask": GroundTruthMask(scene=scene, render=config.render),
        "vision_mask": mask,
        "graph": graph,
        "plan": plan,
        "frames": frames,
        "rejected": rejected,
        "refined_mask": RefineMask(mask=mask, graph=graph, rejected=rejected),
        "passive_plan": passive_plan,
        "passive_frames": passive_frames,
        ReconstructionMethod.vision.value: ReconstructVision(mask=mask, depth=depth),
        ReconstructionMethod.aligned_vision.value: ReconstructAlignedVision(
            mask=mask, scene=scene
        ),
        ReconstructionMethod.passive_tactile.value: ReconstructTactile(
            frames=passive_frames,
            sensor=config.sensor,
            mount=tce,
            method=ReconstructionMethod.passive_tactile,
        ),
        ReconstructionMethod.active_tactile.value: ReconstructTactile(
            frames=frames,
            rejected=rejected,
            sensor=config.sensor,
            mount=tce,
            method=ReconstructionMethod.active_tactile,
        ),
    }


def run_scene(
    config: PipelineConfig, seed: Optional[int] = None, quiet: bool = True
) -> SceneResult:
    if seed is None:
        seed = config.seed
    logging.info(f"Running scene pipeline for seed {seed}")

    targets = build_scene_tasks(config, seed)
    names = {task: name for name, task in targets.items()}
    values = {}
    for task, value in Executor(tasks=list(targets.values())).run(quiet=quiet):
        values[names[task]] = value

    profiles = {method: values.pop(method.value) for method in METHOD_ORDER}
    return SceneResult(seed=seed, profiles=profiles, **values)


def _detection_for(
    result: SceneResult, method: ReconstructionMethod
) -> Optional[DetectionMetrics]:
    if method in (ReconstructionMethod.vision, ReconstructionMethod.aligned_vision):
        return detection_metrics(result.vision_mask, result.truth_mask)
    if method == ReconstructionMethod.active_tactile:
        return detection_metrics(result.refined_mask, result.truth_mask)
    return None


def _recon_for(
    result: SceneResult, method: ReconstructionMethod, config: PipelineConfig
) -> Optional[ReconMetrics]:
    truth = result.scene.truth_polylines(config.evaluation.truth_mode)
    try:
        return distance_metrics(
            result.profiles[method], truth, symmetric=config.evaluation.symmetric
        )
    except NoReconstructionError as e:
        logging.warning(f"seed {result.seed}, {method.value}: {e}")
        return None


def _time_for(
    result: SceneResult, method: ReconstructionMethod, config: PipelineConfig
):
    ev = config.evaluation
    if method == ReconstructionMethod.passive_tactile:
        plan = result.passive_plan
        return timing_model(plan, ev.per_touch_s, ev.travel_mm_per_s), plan.n_touches
    if method == ReconstructionMethod.active_tactile:
        plan = result.plan
        touch_s = timing_model(plan, ev.per_touch_s, ev.travel_mm_per_s)
        return ev.vision_time_s + touch_s, plan.n_touches
    return ev.vision_time_s, 0


def evaluate_scene(result: SceneResult, config: PipelineConfig) -> pd.DataFrame:
    """One row per method.

    Detection columns score the raw vision mask for the two vision methods and
    the touch-refined mask for active touch; passive touch has no mask.
    """
    rows = []
    for method in METHOD_ORDER:
        detection = _detection_for(result, method)
        recon = _recon_for(result, method, config)
        time_s, n_touches = _time_for(result, method, config)
        rows.append(
            {
                "seed": result.seed,
                "method": method.value,
                "pix_acc": detection.pix_acc if detection else math.nan,
                "iou": detection.iou if detection else math.nan,
                "mean_d": recon.mean_d if recon else math.nan,
                "sd": recon.sd if recon else math.nan,
                "max_d": recon.max_d if recon else math.nan,
                "time_s": time_s,
                "n_touches": n_touches,
            }
        )
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_frames(frames: List[TactileFrame], writer: ArtifactWriter):
    for idx, frame in enumerate(frames):
        name = f"frames/{frame_name(idx)}"
        save_frame(frame, writer.path(name))
        writer.path(sidecar_path(name))


def write_scene_artifacts(
    result: SceneResult,
    report: pd.DataFrame,
    writer: ArtifactWriter,
    config: PipelineConfig,
):
    writer.save_model("scenes/scene.json", result.scene)
    writer.save_model("scenes/config.json", config)
    writer.save_raster("scenes/top_view.pgm", result.top_view)
    writer.save_raster("scenes/depth.pgm", result.depth)
    writer.save_raster("scenes/truth_mask.pgm", result.truth_mask)

    writer.save_raster("masks/vision_mask.pgm", result.vision_mask)
    writer.save_raster("masks/refined_mask.pgm", result.refined_mask)
    writer.save_raster("masks/skeleton.pgm", result.graph.skeleton)
    save_graph(result.graph, writer.path("masks/graph.json"))

    save_plan(result.plan, writer.path("frames/plan.json"))
    save_plan(result.passive_plan, writer.path("frames/passive_plan.json"))
    write_frames(result.frames, writer)
    writer.save_json("frames/rejected_edges.json", sorted(result.rejected))

    for method, profile in result.profiles.items():
        save_profile(profile, writer.path(f"profiles/{method.value}.csv"))
        save_ply(profile, writer.path(f"profiles/{method.value}.ply"))

    writer.save_table("reports/report.csv", report)
    writer.save_text(
        "reports/overlay.svg", render_overlay(result.scene, result.profiles)
    )


def run_pipeline(config: PipelineConfig, quiet: bool = False) -> pd.DataFrame:
    """Run one scene end to end and write its artifact tree."""
    result = run_scene(config, quiet=quiet)
    report = evaluate_scene(result, config)

    logging.info(f"Writing artifacts to {config.out_dir}")
    writer = ArtifactWriter(config.out_dir)
    write_scene_artifacts(result, report, writer, config)
    writer.finalize()
    return report
