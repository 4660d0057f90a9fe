from typing import List, Sequence, Tuple

import numpy as np

from crackkit.config import PipelineConfig, RenderConfig
from crackkit.geometry import Point3mm, RigidTransform
from crackkit.raster import RasterImage
from crackkit.scene import CrackKind, CrackPath, CrackScene


def crack(
    points: Sequence[Tuple[float, float]],
    width: float = 2.0,
    kind: CrackKind = CrackKind.real,
    depth: float = 2.0,
    z: float = 10.0,
) -> CrackPath:
    return CrackPath(
        polyline=tuple(Point3mm(x=x, y=y, z=z) for x, y in points),
        width=width,
        kind=kind,
        depth=depth if kind == CrackKind.real else 0.0,
    )


def painted(points: Sequence[Tuple[float, float]], width: float = 2.0) -> CrackPath:
    return crack(points, width=width, kind=CrackKind.painted)


def make_scene(*cracks: CrackPath, seed: int = 0, **kwargs) -> CrackScene:
    return CrackScene(cracks=tuple(cracks), rng_seed=seed, **kwargs)


def mask_from_rows(rows: List[str], **kwargs) -> RasterImage:
    """Binary raster from strings of '#' (crack) and '.' (background)."""
    data = np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)
    return RasterImage.binary(data, **kwargs)


def noiseless_config(**kwargs) -> PipelineConfig:
    return PipelineConfig(
        render=RenderConfig(image_noise=0.0, depth_noise=0.0), **kwargs
    )


def random_transform(rng: np.random.Generator) -> RigidTransform:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return RigidTransform.from_matrix(q, rng.uniform(-50, 50, size=3))
