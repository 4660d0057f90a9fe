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
Netpbm raster files with a JSON sidecar.

Binary masks are written as 8-bit P5 (0/255), grayscale rasters as 16-bit P5
with a linear value mapping recorded in the sidecar. P1 (plain bitmap) masks
are accepted on load. The sidecar lives next to the raster as `<path>.json`.
"""

import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from crackkit.common import MissingSidecarError, RasterParseError
from crackkit.geometry import Point3mm
from crackkit.raster import RasterImage, RasterKind

_WHITESPACE = b" \t\r\n\x0b\x0c"


class RasterSidecar(BaseModel):
    kind: RasterKind
    scale: float
    origin: Point3mm
    value_offset: float = 0.0
    value_scale: float = 1.0
    extra: Dict[str, Any] = {}


def sidecar_path(path: str) -> str:
    return path + ".json"


def save_raster(
    raster: RasterImage, path: str, extra: Optional[Dict[str, Any]] = None
) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    header = f"P5\n{raster.width} {raster.height}\n"
    if raster.kind == RasterKind.binary:
        payload = np.where(raster.data, 255, 0).astype(np.uint8).tobytes()
        header += "255\n"
        offset, value_scale = 0.0, 1.0
    else:
        data = raster.data
        offset = float(data.min()) if data.size else 0.0
        span = float(data.max()) - offset if data.size else 0.0
        value_scale = span / 65535.0 if span > 0 else 1.0
        quantized = np.rint((data - offset) / value_scale).astype(">u2")
        payload = quantized.tobytes()
        header += "65535\n"

    with open(path, "wb") as fp:
        fp.write(header.encode("ascii"))
        fp.write(payload)

    sidecar = RasterSidecar(
        kind=raster.kind,
        scale=raster.scale,
        origin=raster.origin,
        value_offset=offset,
        value_scale=value_scale,
        extra=extra or {},
    )
    with open(sidecar_path(path), "w", encoding="utf-8") as fp:
        fp.write(sidecar.model_dump_json(indent=2))


def load_sidecar(path: str) -> RasterSidecar:
    side = sidecar_path(path)
    if not os.path.exists(side):
        raise MissingSidecarError(side)
    with open(side, "r", encoding="utf-8") as fp:
        return RasterSidecar.model_validate_json(fp.read())


def load_raster(path: str) -> Tuple[RasterImage, RasterSidecar]:
    sidecar = load_sidecar(path)
    with open(path, "rb") as fp:
        blob = fp.read()

    data = _parse_netpbm(blob)
    if sidecar.kind == RasterKind.binary:
        data = data > 0
    else:
        data = data.astype(np.float64) * sidecar.value_scale + sidecar.value_offset

    raster = RasterImage(
        kind=sidecar.kind, data=data, scale=sidecar.scale, origin=sidecar.origin
    )
    return raster, sidecar


def _parse_netpbm(blob: bytes) -> np.ndarray:
    if len(blob) < 2:
        raise RasterParseError("File too short for a netpbm header", len(blob))
    magic = blob[:2]
    if magic not in (b"P5", b"P1"):
        raise RasterParseError(f"Unsupported magic number {magic!r}", 0)

    pos = 2
    num_fields = 3 if magic == b"P5" else 2
    fields: List[int] = []
    while len(fields) < num_fields:
        token, pos = _next_token(blob, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise RasterParseError(f"Expected integer, got {token!r}", pos - len(token))

    width, height = fields[0], fields[1]
    if width <= 0 or height <= 0:
        raise RasterParseError(f"Invalid raster size {width}x{height}", pos)

    if magic == b"P1":
        return _parse_plain_bits(blob, pos, width, height)

    maxval = fields[2]
    if not 0 < maxval < 65536:
        raise RasterParseError(f"Invalid maxval {maxval}", pos)
    if pos >= len(blob) or blob[pos : pos + 1] not in _WHITESPACE:
        raise RasterParseError("Missing whitespace before pixel data", pos)
    pos += 1

    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    available = len(blob) - pos
    if available < expected:
        raise RasterParseError(
            f"Truncated pixel data: expected {expected} bytes, found {available}",
            len(blob),
        )
    data = np.frombuffer(blob, dtype=dtype, count=width * height, offset=pos)
    return data.reshape(height, width).astype(np.int64)


def _parse_plain_bits(blob: bytes, pos: int, width: int, height: int) -> np.ndarray:
    bits = []
    while len(bits) < width * height:
        pos = _skip_space(blob, pos)
        if pos >= len(blob):
            raise RasterParseError(
                f"Truncated bitmap: expected {width * height} bits, found {len(bits)}",
                pos,
            )
        ch = blob[pos : pos + 1]
        if ch not in (b"0", b"1"):
            raise RasterParseError(f"Unexpected character {ch!r} in bitmap", pos)
        bits.append(1 if ch == b"1" else 0)
        pos += 1
    return np.array(bits, dtype=np.int64).reshape(height, width)


def _skip_space(blob: bytes, pos: int) -> int:
    while pos < len(blob):
        ch = blob[pos : pos + 1]
        if ch == b"#":
            while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    return pos


def _next_token(blob: bytes, pos: int) -> Tuple[bytes, int]:
    pos = _skip_space(blob, pos)
    if pos >= len(blob):
        raise RasterParseError("Unexpected end of header", pos)
    start = pos
    while pos < len(blob):
        ch = blob[pos : pos + 1]
        if ch == b"#" or ch in _WHITESPACE:
            break
        pos += 1
    return blob[start:pos], pos
