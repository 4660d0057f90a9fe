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
Crack skeletons and their keypoint / minimal-edge graphs.

Pixels are addressed as (row, col). Neighbours are 8-connected, except that a
diagonal link is ignored when the two pixels already share a 4-neighbour in the
skeleton (m-adjacency). Components are the same as under plain 8-connectivity,
but staircase corners and crossings are not double counted.
"""

import json
import logging
import os
from typing import Dict, List, Optional, Set, Tuple

import networkx
import numpy as np
import scipy.ndimage
from pydantic import BaseModel
from typing_extensions import TypeAlias

from crackkit.common import NotASkeletonError
from crackkit.geometry import Point3mm
from crackkit.raster import RasterImage, RasterKind

Pixel: TypeAlias = Tuple[int, int]

_DIAGONALS = ((-1, -1), (-1, 1), (1, -1), (1, 1))
_ORTHOGONALS = ((-1, 0), (0, -1), (0, 1), (1, 0))


class SkeletonConfig(BaseModel, frozen=True):
    prune_spur_length_px: int = 0


class MinimalEdge(BaseModel, frozen=True):
    """Ordered pixel path between two keypoints, or a closed loop.

    For open edges the first and last pixels are the bounding keypoints. Closed
    loops start at their lexicographically smallest pixel and do not repeat it.
    """

    pixels: Tuple[Pixel, ...]
    closed: bool = False

    @property
    def interior(self) -> Tuple[Pixel, ...]:
        if self.closed:
            return self.pixels
        return self.pixels[1:-1]

    def __len__(self) -> int:
        return len(self.pixels)


class SkeletonGraph(BaseModel, frozen=True):
    skeleton: RasterImage
    end_points: Tuple[Pixel, ...] = ()
    branch_points: Tuple[Pixel, ...] = ()
    minimal_edges: Tuple[MinimalEdge, ...] = ()

    @property
    def keypoints(self) -> Tuple[Pixel, ...]:
        return tuple(sorted(self.end_points + self.branch_points))

    def edges_by_pixel(self) -> Dict[Pixel, List[int]]:
        """Map each skeleton pixel to the indices of the edges containing it."""
        res: Dict[Pixel, List[int]] = {}
        for idx, edge in enumerate(self.minimal_edges):
            for px in edge.pixels:
                owners = res.setdefault(px, [])
                if not owners or owners[-1] != idx:
                    owners.append(idx)
        return res


def thin(mask: RasterImage) -> RasterImage:
    """Zhang-Suen two-subiteration thinning.

    A component the subiterations would remove completely keeps one pixel, so
    the number of 8-connected components never changes.
    """
    if mask.kind != RasterKind.binary:
        raise ValueError("thin expects a binary mask")

    img = np.pad(mask.data.astype(np.uint8), 1)
    while True:
        changed = False
        for step in (0, 1):
            p2 = img[:-2, 1:-1]
            p3 = img[:-2, 2:]
            p4 = img[1:-1, 2:]
            p5 = img[2:, 2:]
            p6 = img[2:, 1:-1]
            p7 = img[2:, :-2]
            p8 = img[1:-1, :-2]
            p9 = img[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)

            count = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            transitions = sum(
                ((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.uint8)
                for i in range(8)
            )
            if step == 0:
                c1 = p2 * p4 * p6 == 0
                c2 = p4 * p6 * p8 == 0
            else:
                c1 = p2 * p4 * p8 == 0
                c2 = p2 * p6 * p8 == 0

            delete = (
                (img[1:-1, 1:-1] == 1)
                & (count >= 2)
                & (count <= 6)
                & (transitions == 1)
                & c1
                & c2
            )
            if delete.any():
                img[1:-1, 1:-1][delete] = 0
                changed = True
        if not changed:
            break

    res = img[1:-1, 1:-1].astype(bool)
    _restore_erased_components(mask.data, res)
    return mask.with_data(res)


def _restore_erased_components(original: np.ndarray, thinned: np.ndarray):
    """Put back the first pixel (row-major) of every 8-connected component the
    subiterations removed completely, e.g. a 2x2 block."""
    labels, n = scipy.ndimage.label(original, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return
    erased = np.setdiff1d(np.arange(1, n + 1), labels[thinned])
    if erased.size == 0:
        return
    flat = labels.ravel()
    # flat index order is row-major, so the first hit is the top-left-most pixel
    first = {}
    for idx in np.flatnonzero(np.isin(flat, erased)):
        first.setdefault(int(flat[idx]), int(idx))
    for idx in first.values():
        thinned.flat[idx] = True
    logging.debug(f"Thinning kept one pixel for {erased.size} erased component(s)")


def neighbor_counts(skeleton: np.ndarray) -> np.ndarray:
    """Number of m-adjacent skeleton neighbours of every pixel."""
    sk = np.pad(skeleton.astype(bool), 1)
    center = sk[1:-1, 1:-1]
    res = np.zeros(center.shape, dtype=np.int64)
    for dr, dc in _ORTHOGONALS:
        res += _shifted(sk, dr, dc)
    for dr, dc in _DIAGONALS:
        res += _shifted(sk, dr, dc) & ~_shifted(sk, dr, 0) & ~_shifted(sk, 0, dc)
    return np.where(center, res, 0)


def _shifted(padded: np.ndarray, dr: int, dc: int) -> np.ndarray:
    h, w = padded.shape
    return padded[1 + dr : h - 1 + dr, 1 + dc : w - 1 + dc]


def _pixel_graph(skeleton: np.ndarray) -> networkx.Graph:
    graph = networkx.Graph()
    rows, cols = np.nonzero(skeleton)
    pixels = set(zip(rows.tolist(), cols.tolist()))
    graph.add_nodes_from(pixels)
    for r, c in pixels:
        for dr, dc in _ORTHOGONALS:
            if (r + dr, c + dc) in pixels:
                graph.add_edge((r, c), (r + dr, c + dc))
        for dr, dc in _DIAGONALS:
            if (
                (r + dr, c + dc) in pixels
                and (r + dr, c) not in pixels
                and (r, c + dc) not in pixels
            ):
                graph.add_edge((r, c), (r + dr, c + dc))
    return graph


def has_solid_block(skeleton: np.ndarray) -> bool:
    sk = skeleton.astype(bool)
    return bool((sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]).any())


def extract_graph(skeleton: RasterImage) -> SkeletonGraph:
    """Classify keypoints and trace minimal edges.

    End points have fewer than two neighbours, branch points more than two. Each
    keypoint is visited in (row, col) order and every untraversed link out of it
    is followed, always stepping to the smallest untraversed neighbour, until
    another keypoint is reached. Keypoint-free components become closed edges.
    """
    if skeleton.kind != RasterKind.binary:
        raise ValueError("extract_graph expects a binary skeleton")
    if has_solid_block(skeleton.data):
        raise NotASkeletonError("Mask contains a solid 2x2 block; thin it first")

    graph = _pixel_graph(skeleton.data)
    end_points = sorted(n for n in graph.nodes if graph.degree[n] < 2)
    branch_points = sorted(n for n in graph.nodes if graph.degree[n] > 2)
    keypoints = set(end_points) | set(branch_points)

    traversed: Set[frozenset] = set()
    edges: List[MinimalEdge] = []

    def _step(cur: Pixel) -> Optional[Pixel]:
        for nxt in sorted(graph[cur]):
            link = frozenset((cur, nxt))
            if link not in traversed:
                traversed.add(link)
                return nxt
        return None

    for kp in sorted(keypoints):
        if graph.degree[kp] == 0:
            edges.append(MinimalEdge(pixels=(kp,)))
            continue
        for first in sorted(graph[kp]):
            link = frozenset((kp, first))
            if link in traversed:
                continue
            traversed.add(link)
            path = [kp, first]
            cur = first
            while cur not in keypoints:
                nxt = _step(cur)
                if nxt is None:
                    break
                path.append(nxt)
                cur = nxt
            edges.append(MinimalEdge(pixels=tuple(path)))

    # components without keypoints are simple loops
    for component in sorted(
        networkx.connected_components(graph), key=lambda nodes: min(nodes)
    ):
        if component & keypoints:
            continue
        start = min(component)
        path = [start]
        cur = _step(start)
        while cur is not None and cur != start:
            path.append(cur)
            cur = _step(cur)
        edges.append(MinimalEdge(pixels=tuple(path), closed=True))

    logging.debug(
        f"Skeleton graph: {len(end_points)} end points, "
        f"{len(branch_points)} branch points, {len(edges)} edges"
    )
    return SkeletonGraph(
        skeleton=skeleton,
        end_points=tuple(end_points),
        branch_points=tuple(branch_points),
        minimal_edges=tuple(edges),
    )


def prune_spurs(graph: SkeletonGraph, max_length_px: int) -> SkeletonGraph:
    """Drop terminal edges of at most `max_length_px` pixels hanging off a branch."""
    if max_length_px <= 0:
        return graph

    ends = set(graph.end_points)
    branches = set(graph.branch_points)
    data = graph.skeleton.data.copy()
    pruned = 0
    for edge in graph.minimal_edges:
        if edge.closed or len(edge) > max_length_px:
            continue
        first, last = edge.pixels[0], edge.pixels[-1]
        if first in ends and last in branches:
            removed = edge.pixels[:-1]
        elif last in ends and first in branches:
            removed = edge.pixels[1:]
        else:
            continue
        for r, c in removed:
            data[r, c] = False
        pruned += 1

    if not pruned:
        return graph
    logging.info(f"Pruned {pruned} spur(s) of up to {max_length_px} px")
    return extract_graph(graph.skeleton.with_data(data))


def break_solid_blocks(skeleton: RasterImage) -> RasterImage:
    """Remove simple pixels from any 2x2 block a thinning pass left behind."""
    data = skeleton.data.copy()
    while has_solid_block(data):
        blocks = data[:-1, :-1] & data[1:, :-1] & data[:-1, 1:] & data[1:, 1:]
        removed = False
        for r, c in np.argwhere(blocks):
            corners = ((r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1))
            if not all(data[p] for p in corners):
                continue
            for p in corners:
                if _is_simple(data, *p):
                    data[p] = False
                    removed = True
                    break
        if not removed:
            break
    return skeleton.with_data(data)


def _is_simple(data: np.ndarray, row: int, col: int) -> bool:
    window = np.pad(data, 1)[row : row + 3, col : col + 3]
    ring = [
        window[0, 1],
        window[0, 2],
        window[1, 2],
        window[2, 2],
        window[2, 1],
        window[2, 0],
        window[1, 0],
        window[0, 0],
    ]
    transitions = sum(
        1 for i in range(8) if not ring[i] and ring[(i + 1) % 8]
    )
    return sum(ring) >= 2 and transitions == 1


def skeletonize(mask: RasterImage, cfg: SkeletonConfig) -> SkeletonGraph:
    skeleton = break_solid_blocks(thin(mask))
    graph = extract_graph(skeleton)
    return prune_spurs(graph, cfg.prune_spur_length_px)


def save_graph(graph: SkeletonGraph, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {
        "width": graph.skeleton.width,
        "height": graph.skeleton.height,
        "scale": graph.skeleton.scale,
        "origin": graph.skeleton.origin.model_dump(mode="json"),
        "end_points": [list(p) for p in graph.end_points],
        "branch_points": [list(p) for p in graph.branch_points],
        "minimal_edges": [
            {"closed": edge.closed, "pixels": [list(p) for p in edge.pixels]}
            for edge in graph.minimal_edges
        ],
    }
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=2)


def load_graph(path: str) -> SkeletonGraph:
    with open(path, "r", encoding="utf-8") as fp:
        doc = json.load(fp)

    data = np.zeros((doc["height"], doc["width"]), dtype=bool)
    edges = []
    for entry in doc["minimal_edges"]:
        pixels = tuple((int(r), int(c)) for r, c in entry["pixels"])
        for px in pixels:
            data[px] = True
        edges.append(MinimalEdge(pixels=pixels, closed=entry["closed"]))

    skeleton = RasterImage.binary(
        data, scale=doc["scale"], origin=Point3mm.model_validate(doc["origin"])
    )
    return SkeletonGraph(
        skeleton=skeleton,
        end_points=tuple((int(r), int(c)) for r, c in doc["end_points"]),
        branch_points=tuple((int(r), int(c)) for r, c in doc["branch_points"]),
        minimal_edges=tuple(edges),
    )
