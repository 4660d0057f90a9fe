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

import json
import logging
import os
from typing import Callable, Optional

import click
import pandas as pd
import yaml
from pydantic import ValidationError

from crackkit import segmentation
from crackkit.benchmark import run_benchmark, write_benchmark
from crackkit.common import NoReconstructionError
from crackkit.config import PipelineConfig, format_validation_error, load_config
from crackkit.evaluation import distance_metrics
from crackkit.graph import Executor
from crackkit.io.artifact_writer import ArtifactWriter
from crackkit.io.raster_io import load_raster
from crackkit.options import PipelineOptions, add_pipeline_options
from crackkit.pipeline import build_scene_tasks, run_pipeline, write_frames
from crackkit.planner import load_plan, plan_scene, save_plan
from crackkit.reconstruction import (
    ReconstructionMethod,
    load_profile,
    reconstruct_tactile,
    save_ply,
    save_profile,
)
from crackkit.scene import load_scene
from crackkit.skeleton import load_graph, save_graph, skeletonize
from crackkit.tactile import collect_frames, load_frames, reject_false_edges

EVAL_COLUMNS = ["method", "n_points", "mean_d", "sd", "max_d"]


def pipeline_command(f: Callable) -> Callable:
    """Config file, verbosity and override flags shared by every subcommand."""
    f = add_pipeline_options(f)
    f = click.option(
        "--verbose",
        "-v",
        type=bool,
        default=False,
        is_flag=True,
        help="Verbose logging",
    )(f)
    f = click.option(
        "--config",
        "config_file",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON or YAML pipeline config (defaults apply when omitted)",
    )(f)
    return f


def setup(
    config_file: Optional[str], pipeline_options: PipelineOptions, verbose: bool
) -> PipelineConfig:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    try:
        return pipeline_options.apply(load_config(config_file))
    except ValidationError as e:
        raise click.ClickException(format_validation_error(e)) from e
    except yaml.YAMLError as e:
        raise click.ClickException(f"Could not parse {config_file}: {e}") from e


@click.group("crackkit")
def main():
    """Vision-guided tactile crack detection and reconstruction."""


@main.command("gen-scene")
@pipeline_command
def cmd_gen_scene(
    pipeline_options: PipelineOptions, config_file: Optional[str], verbose: bool
):
    """Generate a scene and render its overhead, depth and truth rasters."""
    config = setup(config_file, pipeline_options, verbose)
    targets = build_scene_tasks(config, config.seed)
    names = ["scene", "top_view", "depth", "truth_mask"]
    tasks = {targets[name]: name for name in names}

    values = {}
    for task, value in Executor(tasks=list(tasks)).run(quiet=pipeline_options.quiet):
        values[tasks[task]] = value

    writer = ArtifactWriter(config.out_dir)
    writer.save_model("scenes/scene.json", values["scene"])
    writer.save_model("scenes/config.json", config)
    for name in names[1:]:
        writer.save_raster(f"scenes/{name}.pgm", values[name])
    writer.finalize()
    click.echo(
        f"Scene {config.seed}: {len(values['scene'].real_cracks())} real, "
        f"{len(values['scene'].painted_cracks())} painted crack(s)"
    )


@main.command("segment")
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False))
@pipeline_command
def cmd_segment(
    pipeline_options: PipelineOptions,
    image_path: str,
    config_file: Optional[str],
    verbose: bool,
):
    """Segment an overhead image into a binary crack mask."""
    config = setup(config_file, pipeline_options, verbose)
    image, _ = load_raster(image_path)
    cfg = config.segmentation
    mask = segmentation.get(cfg.method).segment(image, cfg)

    writer = ArtifactWriter(config.out_dir)
    writer.save_raster("masks/vision_mask.pgm", mask)
    writer.finalize()
    click.echo(f"{int(mask.data.sum())} crack pixels")


@main.command("skeleton")
@click.argument("mask_path", type=click.Path(exists=True, dir_okay=False))
@pipeline_command
def cmd_skeleton(
    pipeline_options: PipelineOptions,
    mask_path: str,
    config_file: Optional[str],
    verbose: bool,
):
    """Thin a crack mask and extract its keypoint graph."""
    config = setup(config_file, pipeline_options, verbose)
    graph = skeletonize(segmentation.load_mask(mask_path), config.skeleton)

    writer = ArtifactWriter(config.out_dir)
    writer.save_raster("masks/skeleton.pgm", graph.skeleton)
    save_graph(graph, writer.path("masks/graph.json"))
    writer.finalize()
    click.echo(
        f"{len(graph.end_points)} end point(s), "
        f"{len(graph.branch_points)} branch point(s), "
        f"{len(graph.minimal_edges)} edge(s)"
    )


@main.command("plan")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("depth_path", type=click.Path(exists=True, dir_okay=False))
@pipeline_command
def cmd_plan(
    pipeline_options: PipelineOptions,
    graph_path: str,
    depth_path: str,
    config_file: Optional[str],
    verbose: bool,
):
    """Choose contact poses along every skeleton edge."""
    config = setup(config_file, pipeline_options, verbose)
    depth, _ = load_raster(depth_path)
    plan = plan_scene(load_graph(graph_path), depth, config.planner)

    writer = ArtifactWriter(config.out_dir)
    save_plan(plan, writer.path("frames/plan.json"))
    writer.finalize()
    click.echo(f"{plan.n_touches} contact(s), tour {plan.tour_length():.3f} mm")


@main.command("touch")
@click.argument("scene_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("plan_path", type=click.Path(exists=True, dir_okay=False))
@pipeline_command
def cmd_touch(
    pipeline_options: PipelineOptions,
    scene_path: str,
    plan_path: str,
    config_file: Optional[str],
    verbose: bool,
):
    """Press the simulated sensor at every planned contact."""
    config = setup(config_file, pipeline_options, verbose)
    frames = collect_frames(
        load_scene(scene_path),
        load_plan(plan_path),
        config.sensor,
        mount=config.tce(),
        quiet=pipeline_options.quiet,
    )
    rejected = reject_false_edges(frames, config.rejection)

    writer = ArtifactWriter(config.out_dir)
    write_frames(frames, writer)
    writer.save_json("frames/rejected_edges.json", sorted(rejected))
    writer.finalize()
    click.echo(f"{len(frames)} frame(s), rejected edges: {sorted(rejected)}")


@main.command("reconstruct")
@click.argument("frames_dir", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--method",
    type=click.Choice(
        [
            ReconstructionMethod.active_tactile.value,
            ReconstructionMethod.passive_tactile.value,
        ]
    ),
    default=ReconstructionMethod.active_tactile.value,
    show_default=True,
    help="Label for the reconstructed profile",
)
@click.option(
    "--skip-rejected/--keep-rejected",
    default=True,
    show_default=True,
    help="Drop frames of edges listed in rejected_edges.json",
)
@pipeline_command
def cmd_reconstruct(
    pipeline_options: PipelineOptions,
    frames_dir: str,
    method: str,
    skip_rejected: bool,
    config_file: Optional[str],
    verbose: bool,
):
    """Lift tactile frames to a world-space crack profile."""
    config = setup(config_file, pipeline_options, verbose)
    frames = load_frames(frames_dir)
    rejected = []
    rejected_path = os.path.join(frames_dir, "rejected_edges.json")
    if skip_rejected and os.path.exists(rejected_path):
        with open(rejected_path, "r", encoding="utf-8") as fp:
            rejected = json.load(fp)

    profile = reconstruct_tactile(
        frames,
        config.sensor,
        tce=config.tce(),
        method=ReconstructionMethod(method),
        skip_edges=set(rejected),
    )
    writer = ArtifactWriter(config.out_dir)
    save_profile(profile, writer.path(f"profiles/{method}.csv"))
    save_ply(profile, writer.path(f"profiles/{method}.ply"))
    writer.finalize()
    click.echo(f"{len(profile)} point(s) from {len(frames)} frame(s)")


@main.command("eval")
@click.argument("profile_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("scene_path", type=click.Path(exists=True, dir_okay=False))
@pipeline_command
def cmd_eval(
    pipeline_options: PipelineOptions,
    profile_path: str,
    scene_path: str,
    config_file: Optional[str],
    verbose: bool,
):
    """Shortest-distance metrics of a profile CSV against a scene's cracks."""
    config = setup(config_file, pipeline_options, verbose)
    scene = load_scene(scene_path)
    ev = config.evaluation
    try:
        profile = load_profile(profile_path)
        metrics = distance_metrics(
            profile, scene.truth_polylines(ev.truth_mode), symmetric=ev.symmetric
        )
    except NoReconstructionError as e:
        raise click.ClickException(str(e)) from e

    table = pd.DataFrame(
        [
            {
                "method": profile.method.value,
                "n_points": len(profile),
                "mean_d": metrics.mean_d,
                "sd": metrics.sd,
                "max_d": metrics.max_d,
            }
        ],
        columns=EVAL_COLUMNS,
    )
    writer = ArtifactWriter(config.out_dir)
    writer.save_table(f"reports/eval_{profile.method.value}.csv", table)
    writer.finalize()
    click.echo(table.to_string(index=False))


@main.command("compare")
@click.option(
    "--workers",
    type=int,
    default=1,
    show_default=True,
    help="Worker processes used to score scenes",
)
@pipeline_command
def cmd_compare(
    pipeline_options: PipelineOptions,
    workers: int,
    config_file: Optional[str],
    verbose: bool,
):
    """Four-method benchmark over `suite_size` seeded scenes."""
    config = setup(config_file, pipeline_options, verbose)
    report = run_benchmark(config, quiet=pipeline_options.quiet, workers=workers)

    writer = ArtifactWriter(config.out_dir)
    write_benchmark(report, writer)
    writer.finalize()

    summary = report.summary
    click.echo(
        f"{summary['n_scenes']} scenes; ordering "
        f"{'pass' if summary['ordering_pass'] else 'FAIL'}; refinement wins "
        f"{summary['refinement_wins']}/{summary['n_scenes']}; "
        f"min touch ratio {summary['min_touch_ratio']}"
    )


@main.command("run")
@pipeline_command
def cmd_run(
    pipeline_options: PipelineOptions, config_file: Optional[str], verbose: bool
):
    """Run one scene end to end and write the full artifact tree."""
    config = setup(config_file, pipeline_options, verbose)
    report = run_pipeline(config, quiet=pipeline_options.quiet)
    click.echo(report.to_string(index=False))


if __name__ == "__main__":
    main()
