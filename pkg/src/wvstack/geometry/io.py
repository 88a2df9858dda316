"""Flat-binary rasters and JSON sidecars.

Complex rasters are interleaved (real, imag) float32 little-endian, line
major; masks are one byte per cell (1 = valid).
"""

import json
import os

import numpy as np

from ..errors import DataError, MalformedManifest, MissingField
from .frame import MapGrid
from .geocode import GeocodedRaster
from .orbit import OrbitModel
from .radar import RadarGeometry

COMPLEX_DTYPE = np.dtype("<c8")


def dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_text(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj))


def read_text(path):
    with open(path, "rb") as f:
        return loads(f.read())


def loads(document):
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedManifest(f"document is not UTF-8: {exc}") from exc
    try:
        return json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedManifest(str(exc)) from exc


def write_complex(path, data):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.ascontiguousarray(data, dtype=COMPLEX_DTYPE).tofile(path)


def read_complex(path, shape):
    data = np.fromfile(path, dtype=COMPLEX_DTYPE)
    if data.size != shape[0] * shape[1]:
        raise DataError(f"{path}: expected {shape[0] * shape[1]} samples, found {data.size}")
    return data.reshape(shape)


def write_geometry(path, geom, orbit):
    write_text(path, {"radar_geometry": geom.to_dict(), "orbit": orbit.to_dict()})


def read_geometry(path):
    d = read_text(path)
    for key in ("radar_geometry", "orbit"):
        if key not in d:
            raise MissingField(key, path)
    return RadarGeometry.from_dict(d["radar_geometry"]), OrbitModel.from_dict(d["orbit"])


def write_raster(stem, raster, extra=None):
    """Write ``stem.slc``, ``stem.mask`` and ``stem.json`` (grid sidecar)."""
    write_complex(stem + ".slc", raster.samples)
    raster.mask.astype(np.uint8).tofile(stem + ".mask")
    meta = {"grid": raster.grid.to_dict()}
    if extra:
        meta.update(extra)
    write_text(stem + ".json", meta)


def read_raster(stem):
    meta = read_text(stem + ".json")
    grid = MapGrid.from_dict(meta["grid"])
    samples = read_complex(stem + ".slc", grid.shape)
    mask = np.fromfile(stem + ".mask", dtype=np.uint8)
    if mask.size != grid.n_east * grid.n_north:
        raise DataError(f"{stem}.mask has wrong size")
    return GeocodedRaster(grid, samples, mask.reshape(grid.shape).astype(bool))
