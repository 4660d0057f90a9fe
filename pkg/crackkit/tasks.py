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

from typing import Dict, List, Optional, Set

from crackkit import segmentation
from crackkit.config import RenderConfig
from crackkit.evaluation import EvaluationConfig
from crackkit.geometry import RigidTransform, SensorModel
from crackkit.graph import Task
from crackkit.planner import PlannerConfig, TouchPlan, plan_scene
from crackkit.raster import RasterImage
from crackkit.reconstruction import (
    ReconstructedProfile,
    ReconstructionMethod,
    passive_raster_plan,
    reconstruct_aligned_vision,
    reconstruct_tactile,
    reconstruct_vision,
)
from crackkit.scene import (
    CrackScene,
    SceneParameters,
    generate_random_scene,
    ground_truth_mask,
    render_depth,
    render_top_view,
)
from crackkit.segmentation import SegmenterConfig
from crackkit.skeleton import SkeletonConfig, SkeletonGraph, skeletonize
from crackkit.tactile import (
    RejectionConfig,
    TactileFrame,
    collect_frames,
    refine_visual_mask,
    reject_false_edges,
)


class GenerateScene(Task[CrackScene]):
    seed: int
    params: SceneParameters

    def arguments(self) -> Dict[str, Task]:
        return {}

    def execute(self) -> CrackScene:
        return generate_random_scene(self.seed, self.params)

    def priority(self) -> int:
        return 100


class RenderTopView(Task[RasterImage]):
    scene: GenerateScene
    render: RenderConfig

    def arguments(self) -> Dict[str, Task]:
        return {"scene": self.scene}

    def execute(self, scene: CrackScene) -> RasterImage:
        return render_top_view(
            scene, self.render.mm_per_px, noise_sigma=self.render.image_noise
        )


class RenderDepth(Task[RasterImage]):
    scene: GenerateScene
    render: RenderConfig

    def arguments(self) -> Dict[str, Task]:
        return {"scene": self.scene}

    def execute(self, scene: CrackScene) -> RasterImage:
        return render_depth(
            scene, self.render.mm_per_px, noise_sigma=self.render.depth_noise
        )


class GroundTruthMask(Task[RasterImage]):
    scene: GenerateScene
    render: RenderConfig
    include_painted: bool = False

    def arguments(self) -> Dict[str, Task]:
        return {"scene": self.scene}

    def execute(self, scene: CrackScene) -> RasterImage:
        return ground_truth_mask(
            scene, self.render.mm_per_px, include_painted=self.include_painted
        )


class SegmentImage(Task[RasterImage]):
    image: RenderTopView
    config: SegmenterConfig

    def arguments(self) -> Dict[str, Task]:
        return {"image": self.image}

    def execute(self, image: RasterImage) -> RasterImage:
        return segmentation.get(self.config.method).segment(image, self.config)


class ExtractSkeleton(Task[SkeletonGraph]):
    mask: SegmentImage
    config: SkeletonConfig

    def arguments(self) -> Dict[str, Task]:
        return {"mask": self.mask}

    def execute(self, mask: RasterImage) -> SkeletonGraph:
        return skeletonize(mask, self.config)


class PlanContacts(Task[TouchPlan]):
    graph: ExtractSkeleton
    depth: RenderDepth
    config: PlannerConfig

    def arguments(self) -> Dict[str, Task]:
        return {"graph": self.graph, "depth": self.depth}

    def execute(self, graph: SkeletonGraph, depth: RasterImage) -> TouchPlan:
        return plan_scene(graph, depth, self.config)


class PassivePlan(Task[TouchPlan]):
    scene: GenerateScene
    sensor: SensorModel
    config: EvaluationConfig

    def arguments(self) -> Dict[str, Task]:
        return {"scene": self.scene}

    def execute(self, scene: CrackScene) -> TouchPlan:
        return passive_raster_plan(
            scene.plate_width,
            scene.plate_height,
            self.sensor,
            overlap=self.config.passive_overlap,
            n_rotations=self.config.passive_rotations,
            surface_z=scene.top_z,
        )


class PressContacts(Task[List[TactileFrame]]):
    scene: GenerateScene
    plan: Task[TouchPlan]
    sensor: SensorModel
    mount: RigidTransform

    def arguments(self) -> Dict[str, Task]:
        return {"scene": self.scene, "plan": self.plan}

    def execute(self, scene: CrackScene, plan: TouchPlan) -> List[TactileFrame]:
        return collect_frames(scene, plan, self.sensor, mount=self.mount)

    def priority(self) -> int:
        return -10


class RejectEdges(Task[Set[int]]):
    frames: PressContacts
    config: RejectionConfig

    def arguments(self) -> Dict[str, Task]:
        return {"frames": self.frames}

    def execute(self, frames: List[TactileFrame]) -> Set[int]:
        return reject_false_edges(frames, self.config)


class RefineMask(Task[RasterImage]):
    mask: SegmentImage
    graph: ExtractSkeleton
    rejected: RejectEdges

    def arguments(self) -> Dict[str, Task]:
        return {"mask": self.mask, "graph": self.graph, "rejected": self.rejected}

    def execute(
        self, mask: RasterImage, graph: SkeletonGraph, rejected: Set[int]
    ) -> RasterImage:
        return refine_visual_mask(mask, graph, rejected)


class ReconstructVision(Task[ReconstructedProfile]):
    mask: SegmentImage
    depth: RenderDepth

    def arguments(self) -> Dict[str, Task]:
        return {"mask": self.mask, "depth": self.depth}

    def execute(self, mask: RasterImage, depth: RasterImage) -> ReconstructedProfile:
        return reconstruct_vision(mask, depth)


class ReconstructAlignedVision(Task[ReconstructedProfile]):
    mask: SegmentImage
    scene: GenerateScene

    def arguments(self) -> Dict[str, Task]:
        return {"mask": self.mask, "scene": self.scene}

    def execute(self, mask: RasterImage, scene: CrackScene) -> ReconstructedProfile:
        return reconstruct_aligned_vision(mask, scene.top_z)


class ReconstructTactile(Task[ReconstructedProfile]):
    frames: PressContacts
    sensor: SensorModel
    mount: RigidTransform
    method: ReconstructionMethod
    rejected: Optional[RejectEdges] = None

    def arguments(self) -> Dict[str, Task]:
        res = {"frames": self.frames}
        if self.rejected is not None:
            res["rejected"] = self.rejected
        return res

    def execute(
        self, frames: List[TactileFrame], rejected: Optional[Set[int]] = None
    ) -> ReconstructedProfile:
        return reconstruct_tactile(
            frames,
            self.sensor,
            tce=self.mount,
            method=self.method,
            skip_edges=rejected or set(),
        )
