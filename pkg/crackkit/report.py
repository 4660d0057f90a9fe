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

from typing import Dict, List

import numpy as np
import scipy.spatial

from crackkit.reconstruction import ReconstructedProfile, ReconstructionMethod
from crackkit.scene import CrackScene

SVG_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" \
viewBox="0 0 {plate_width:.3f} {plate_height:.3f}">
<title>{title}</title>
<rect x="0" y="0" width="{plate_width:.3f}" height="{plate_height:.3f}" \
fill="#f4f4f4" stroke="#888888" stroke-width="0.2"/>
{layers}
</svg>
"""

LAYER_TEMPLATE = """<g id="{name}" fill="none" stroke="{color}" \
stroke-width="{stroke:.3f}" stroke-linejoin="round">
{polylines}
</g>"""

POLYLINE_TEMPLATE = '<polyline points="{points}"/>'

LAYER_COLORS = {
    "truth": "#1f4fd1",
    ReconstructionMethod.aligned_vision.value: "#d62728",
    ReconstructionMethod.passive_tactile.value: "#e6b800",
    ReconstructionMethod.active_tactile.value: "#2ca02c",
}

PX_PER_MM = 6.0
MAX_POINTS = 1500
# points farther apart than this start a new polyline when chaining
MAX_LINK_MM = 2.0


def subsample(points: np.ndarray, max_points: int = MAX_POINTS) -> np.ndarray:
    if points.shape[0] <= max_points:
        return points
    idx = np.linspace(0, points.shape[0] - 1, max_points).round().astype(np.int64)
    return points[np.unique(idx)]


def chain_points(
    points: np.ndarray, max_link: float = MAX_LINK_MM
) -> List[np.ndarray]:
    """Order planar points into polylines by nearest-neighbour walking."""
    if points.shape[0] == 0:
        return []
    dist = scipy.spatial.distance.cdist(points, points)
    np.fill_diagonal(dist, np.inf)
    visited = np.zeros(points.shape[0], dtype=bool)

    res = []
    current = [0]
    visited[0] = True
    cur = 0
    for _ in range(points.shape[0] - 1):
        row = np.where(visited, np.inf, dist[cur])
        nxt = int(np.argmin(row))
        if row[nxt] > max_link:
            res.append(points[current])
            current = []
        current.append(nxt)
        visited[nxt] = True
        cur = nxt
    res.append(points[current])
    return res


def _polyline_svg(line: np.ndarray) -> str:
    return POLYLINE_TEMPLATE.format(
        points=" ".join(f"{x:.3f},{y:.3f}" for x, y in line[:, :2])
    )


def render_overlay(
    scene: CrackScene, profiles: Dict[ReconstructionMethod, ReconstructedProfile]
) -> str:
    """SVG of ground truth against the reconstructions, in plate millimetres."""
    layers = []
    truth = scene.truth_polylines("boundary")
    layers.append(
        LAYER_TEMPLATE.format(
            name="truth",
            color=LAYER_COLORS["truth"],
            stroke=0.15,
            polylines="\n".join(_polyline_svg(line) for line in truth),
        )
    )

    for method, profile in profiles.items():
        color = LAYER_COLORS.get(method.value)
        if color is None or len(profile) == 0:
            continue
        points = subsample(profile.points[:, :2])
        lines = [line for line in chain_points(points) if line.shape[0] > 1]
        layers.append(
            LAYER_TEMPLATE.format(
                name=method.value,
                color=color,
                stroke=0.1,
                polylines="\n".join(_polyline_svg(line) for line in lines),
            )
        )

    return SVG_TEMPLATE.format(
        width=scene.plate_width * PX_PER_MM,
        height=scene.plate_height * PX_PER_MM,
        plate_width=scene.plate_width,
        plate_height=scene.plate_height,
        title=f"crack reconstruction overlay (seed {scene.rng_seed})",
        layers="\n".join(layers),
    )
