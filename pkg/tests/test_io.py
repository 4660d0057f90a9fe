import json
import os
import tempfile

import numpy as np
import pandas as pd
import pytest

from crackkit.common import MissingSidecarError, RasterParseError
from crackkit.geometry import Frame, Point3mm
from crackkit.io.artifact_writer import ArtifactWriter
from crackkit.io.raster_io import (
    RasterSidecar,
    load_raster,
    save_raster,
    sidecar_path,
)
from crackkit.raster import RasterImage, RasterKind


def write_with_sidecar(directory: str, name: str, blob: bytes) -> str:
    path = os.path.join(directory, name)
    with open(path, "wb") as fp:
        fp.write(blob)
    sidecar = RasterSidecar(
        kind=RasterKind.binary, scale=1.0, origin=Point3mm(x=0, y=0, z=0)
    )
    with open(sidecar_path(path), "w", encoding="utf-8") as fp:
        fp.write(sidecar.model_dump_json())
    return path


class TestRasterFiles:
    def test_binary_round_trip(self):
        mask = RasterImage.binary(
            np.array([[1, 0, 0], [0, 1, 1]]),
            scale=0.5,
            origin=Point3mm(x=0.25, y=0.25, z=10.0),
        )
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "mask.pgm")
            save_raster(mask, path, extra={"note": "hello"})
            loaded, sidecar = load_raster(path)

            assert loaded.kind == RasterKind.binary
            assert np.array_equal(loaded.data, mask.data)
            assert loaded.origin == mask.origin
            assert sidecar.extra == {"note": "hello"}
            with open(path, "rb") as fp:
                assert fp.read().startswith(b"P5\n3 2\n255\n")

    def test_grayscale_quantization(self):
        rng = np.random.default_rng(4)
        data = rng.uniform(5.0, 12.0, size=(17, 9))
        image = RasterImage.grayscale(data, scale=0.5)
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "depth.pgm")
            save_raster(image, path)
            loaded, sidecar = load_raster(path)
            assert np.abs(loaded.data - data).max() <= sidecar.value_scale / 2 + 1e-12
            assert loaded.data.min() == pytest.approx(data.min())

    def test_constant_grayscale(self):
        image = RasterImage.grayscale(np.full((3, 4), 10.0))
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "flat.pgm")
            save_raster(image, path)
            loaded, _ = load_raster(path)
            assert np.all(loaded.data == 10.0)

    def test_sensor_frame_origin(self):
        image = RasterImage.binary(
            np.zeros((2, 2)), origin=Point3mm(x=-7, y=-5, z=20, frame=Frame.sensor)
        )
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "frame.pgm")
            save_raster(image, path)
            assert load_raster(path)[0].origin.frame == Frame.sensor

    def test_plain_bitmap(self):
        blob = b"P1\n# a comment\n3 2\n1 0 0\n0 1 1\n"
        with tempfile.TemporaryDirectory() as d:
            path = write_with_sidecar(d, "plain.pbm", blob)
            loaded, _ = load_raster(path)
            assert loaded.data.tolist() == [[True, False, False], [False, True, True]]

    def test_missing_sidecar(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "lonely.pgm")
            with open(path, "wb") as fp:
                fp.write(b"P5\n1 1\n255\n\x00")
            with pytest.raises(MissingSidecarError):
                load_raster(path)

    @pytest.mark.parametrize(
        "blob,offset",
        [
            (b"P6\n1 1\n255\n\x00", 0),
            (b"P5\n2 2\n255\n\x00\x00", 13),
            (b"P5\n2 x\n255\n", 5),
            (b"P5\n2 2", 6),
            (b"P1\n2 2\n1 0 1", 12),
            (b"P", 1),
        ],
    )
    def test_malformed(self, blob, offset):
        with tempfile.TemporaryDirectory() as d:
            path = write_with_sidecar(d, "bad.pgm", blob)
            with pytest.raises(RasterParseError) as exc_info:
                load_raster(path)
            assert exc_info.value.offset == offset


class TestArtifactWriter:
    def test_manifest(self):
        with tempfile.TemporaryDirectory() as d:
            writer = ArtifactWriter(d)
            writer.save_json("reports/b.json", {"x": 1})
            writer.save_raster(
                "masks/a.pgm", RasterImage.binary(np.zeros((2, 2), dtype=bool))
            )
            writer.finalize()

            with open(os.path.join(d, "manifest.json"), "r", encoding="utf-8") as fp:
                manifest = json.load(fp)
            assert manifest["artifacts"] == [
                "masks/a.pgm",
                "masks/a.pgm.json",
                "reports/b.json",
            ]

    def test_manifest_merges_earlier_runs(self):
        with tempfile.TemporaryDirectory() as d:
            first = ArtifactWriter(d)
            first.save_text("reports/overlay.svg", "<svg/>")
            first.finalize()

            second = ArtifactWriter(d)
            second.save_text("profiles/vision.csv", "x,y,z\n")
            second.save_text("reports/overlay.svg", "<svg/>")
            second.finalize()

            with open(os.path.join(d, "manifest.json"), "r", encoding="utf-8") as fp:
                names = json.load(fp)["artifacts"]
            assert names == ["profiles/vision.csv", "reports/overlay.svg"]

    def test_table_format(self):
        with tempfile.TemporaryDirectory() as d:
            writer = ArtifactWriter(d)
            table = pd.DataFrame({"method": ["vision"], "mean_d": [float("nan")]})
            table["iou"] = [1 / 3]
            writer.save_table("reports/report.csv", table)
            with open(os.path.join(d, "reports", "report.csv"), "r") as fp:
                assert fp.read().splitlines() == [
                    "method,mean_d,iou",
                    "vision,N/A,0.333333",
                ]
