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
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.spatial
from pydantic import BaseModel, field_validator

from crackkit.common import wrap_angle
from crackkit.geometry import Point2Px, Point3mm
from crackkit.raster import RasterImage, check_same_shape
from crackkit.skeleton import MinimalEdge, SkeletonGraph

# contacts closer than this are treated as the same position
_SAME_POSITION_MM = 1e-9


class PlannerConfig(BaseModel, frozen=True):
    # four fifths of the sensor's 14 mm view length
    d: float = 11.2

    @field_validator("d")
    @classmethod
    def _positive_step(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("step d must be positive")
        return value


class ContactPose(BaseModel, frozen=True):
    position: Point3mm
    yaw: float = 0.0
    source_edge: Optional[int] = None
    source_pixel: Optional[Point2Px] = None

    @field_validator("yaw")
    @classmethod
    def _yaw_range(cls, value: float) -> float:
        if not (-math.pi < value <= math.pi):
            raise ValueError("yaw must lie in (-pi, pi]")
        return value


class TouchPlan(BaseModel, frozen=True):
    contacts: Tuple[ContactPose, ...] = ()

    @property
    def n_touches(self) -> int:
        return len(self.contacts)

    def positions(self) -> np.ndarray:
        if not self.contacts:
            return np.zeros((0, 3))
        return np.array([c.position.as_array() for c in self.contacts])

    def tour_length(self) -> float:
        """World distance travelled visiting contacts in plan order."""
        pos = self.positions()
        if pos.shape[0] < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum())

    def by_edge(self) -> Dict[Optional[int], List[ContactPose]]:
        res: Dict[Optional[int], List[ContactPose]] = {}
        for contact in self.contacts:
            res.setdefault(contact.source_edge, []).append(contact)
        return res


def pixel_to_world(px: Point2Px, depth: RasterImage) -> Point3mm:
    """World point of a pixel, with height read from the depth raster."""
    z = depth.sample(px)
    xy = depth.pixels_to_xy(px.as_array())[0]
    return Point3mm(x=float(xy[0]), y=float(xy[1]), z=z)


def world_to_pixel(p: Point3mm, raster: RasterImage) -> Point2Px:
    uv = raster.xy_to_pixels(np.array([p.x, p.y]))[0]
    return Point2Px(u=float(uv[0]), v=float(uv[1]))


def edge_world_points(edge: MinimalEdge, depth: RasterImage) -> np.ndarray:
    """(N, 3) world coordinates of an edge's (row, col) pixels."""
    rc = np.array(edge.pixels, dtype=np.int64).reshape(-1, 2)
    xy = depth.pixels_to_xy(rc[:, ::-1])
    return np.column_stack([xy, depth.data[rc[:, 0], rc[:, 1]]])


def select_contact_indices(points: np.ndarray, d: float) -> List[int]:
    """Greedy contact choice along an ordered path.

    From the current contact, the next one is the later point farthest away in
    world distance while still strictly closer than `d`. Ties go to the later
    point. If no later point is admissible the path's last point is taken.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        return []

    res = [0]
    current = 0
    while current < n - 1:
        later = points[current + 1 :]
        dist = np.linalg.norm(later - points[current], axis=1)
        admissible = dist < d
        if not admissible.any():
            res.append(n - 1)
            break
        score = np.where(admissible, dist, -np.inf)
        current = current + 1 + int(np.flatnonzero(score == score.max())[-1])
        res.append(current)
    return res


def edge_contacts(
    edge: MinimalEdge, depth: RasterImage, cfg: PlannerConfig
) -> Tuple[List[Point3mm], List[Point2Px]]:
    """Contact points of one edge and the (u, v) pixels they were taken from."""
    points = edge_world_points(edge, depth)
    chosen = select_contact_indices(points, cfg.d)
    contacts = [Point3mm.from_array(points[i]) for i in chosen]
    rows_cols = [edge.pixels[i] for i in chosen]
    pixels = [Point2Px(u=float(c), v=float(r)) for r, c in rows_cols]
    return contacts, pixels


def plan_edge(
    edge: MinimalEdge, depth: RasterImage, cfg: PlannerConfig
) -> List[Point3mm]:
    return edge_contacts(edge, depth, cfg)[0]


def assign_yaw(
    contacts: Sequence[Sequence[Point3mm]],
    pixels: Optional[Sequence[Sequence[Point2Px]]] = None,
) -> List[ContactPose]:
    """Point each contact's x axis at its nearest distinct contact.

    The search runs over all contacts regardless of edge. Contacts sharing a
    position (e.g. a branch point reached from two edges) do not count; a
    contact with no distinct neighbour gets yaw 0.
    """
    flat = [
        (group_idx, i, p)
        for group_idx, group in enumerate(contacts)
        for i, p in enumerate(group)
    ]
    if not flat:
        return []

    xy = np.array([[p.x, p.y] for _, _, p in flat])
    dist = scipy.spatial.distance.cdist(xy, xy)
    dist[dist <= _SAME_POSITION_MM] = np.inf

    res = []
    for row, (group_idx, i, p) in enumerate(flat):
        nearest = int(np.argmin(dist[row]))
        if math.isinf(dist[row, nearest]):
            yaw = 0.0
        else:
            delta = xy[nearest] - xy[row]
            yaw = wrap_angle(math.atan2(delta[1], delta[0]))
        res.append(
            ContactPose(
                position=p,
                yaw=yaw,
                source_edge=group_idx,
                source_pixel=pixels[group_idx][i] if pixels is not None else None,
            )
        )
    return res


def plan_scene(
    graph: SkeletonGraph, depth: RasterImage, cfg: PlannerConfig
) -> TouchPlan:
    """Greedy contacts for every minimal edge, in edge order, with yaws."""
    check_same_shape(graph.skeleton, depth)

    contacts: List[List[Point3mm]] = []
    pixels: List[List[Point2Px]] = []
    for edge in graph.minimal_edges:
        points, pixel_row = edge_contacts(edge, depth, cfg)
        contacts.append(points)
        pixels.append(pixel_row)

    plan = TouchPlan(contacts=tuple(assign_yaw(contacts, pixels)))
    logging.info(
        f"Planned {plan.n_touches} contacts over {len(graph.minimal_edges)} edges"
    )
    return plan


def save_plan(plan: TouchPlan, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(plan.model_dump_json(indent=2))


def load_plan(path: str) -> TouchPlan:
    with open(path, "r", encoding="utf-8") as fp:
        return TouchPlan.model_validate_json(fp.read())
