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

from crackkit.io.artifact_writer import ArtifactWriter
from crackkit.io.raster_io import (
    RasterSidecar,
    load_raster,
    load_sidecar,
    save_raster,
    sidecar_path,
)

__all__ = [
    "ArtifactWriter",
    "RasterSidecar",
    "load_raster",
    "load_sidecar",
    "save_raster",
    "sidecar_path",
]
