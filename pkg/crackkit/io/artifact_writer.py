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
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel

from crackkit.io.raster_io import save_raster, sidecar_path
from crackkit.raster import RasterImage

REPORT_FLOAT_FORMAT = "%.6f"
MISSING_VALUE = "N/A"


class ArtifactWriter:
    """Writes a run's artifacts under `out_path` and indexes them.

    Names are relative, '/'-separated paths. `finalize` writes `manifest.json`
    listing every artifact in sorted order.
    """

    out_path: str
    artifacts: List[str]

    def __init__(self, out_path: str) -> None:
        os.makedirs(out_path, exist_ok=True)
        self.out_path = out_path
        self.artifacts = []

    def path(self, name: str) -> str:
        """Absolute location for `name`, recorded as written."""
        full = os.path.join(self.out_path, *name.split("/"))
        os.makedirs(os.path.dirname(full), exist_ok=True)
        self._record(name)
        return full

    def _record(self, name: str):
        if name not in self.artifacts:
            self.artifacts.append(name)

    def save_raster(
        self, name: str, raster: RasterImage, extra: Optional[Dict[str, Any]] = None
    ):
        save_raster(raster, self.path(name), extra=extra)
        self._record(sidecar_path(name))

    def save_model(self, name: str, model: BaseModel):
        with open(self.path(name), "w", encoding="utf-8") as fp:
            fp.write(model.model_dump_json(indent=2))

    def save_json(self, name: str, data: Any):
        with open(self.path(name), "w", encoding="utf-8") as fp:
            json.dump(data, fp, indent=2, sort_keys=True)

    def save_text(self, name: str, text: str):
        with open(self.path(name), "w", encoding="utf-8") as fp:
            fp.write(text)

    def save_table(self, name: str, table: pd.DataFrame):
        table.to_csv(
            self.path(name),
            index=False,
            float_format=REPORT_FLOAT_FORMAT,
            na_rep=MISSING_VALUE,
        )

    def finalize(self):
        manifest_path = os.path.join(self.out_path, "manifest.json")
        names = set(self.artifacts)
        if os.path.exists(manifest_path):
            # earlier commands may have written into the same directory
            with open(manifest_path, "r", encoding="utf-8") as fp:
                names.update(json.load(fp).get("artifacts", []))

        logging.info(f"Writing manifest of {len(names)} artifacts")
        with open(manifest_path, "w", encoding="utf-8") as fp:
            json.dump({"artifacts": sorted(names)}, fp, indent=2)
