"""On-disk layout of a vignette dataset.

::

    <root>/spec.json              simulation spec (simulated datasets only)
    <root>/manifests/<granule>.json
    <root>/slc/<vignette>.slc     complex64, line-major
    <root>/geom/<vignette>.json   radar geometry + orbit sidecar
    <root>/truth.csv              injected errors per rendered scene
    <root>/aoi.json               suggested processing AOI (lon/lat ring)

Raster and geometry locators in the manifests are relative to ``<root>``.
"""

import glob
import os

import numpy as np

from .catalog import as_polygon, parse_manifest, serialize_manifest
from .errors import DataError
from .geometry.io import read_complex, read_geometry, read_text, write_complex, write_geometry, write_text


def resolve(root, uri):
    if not uri or uri.startswith("sim://"):
        raise DataError(f"record has no raster payload ({uri!r})")
    return uri if os.path.isabs(uri) else os.path.join(root, uri)


def aoi_ring(frame, half_size):
    e = np.array([-1.0, 1.0, 1.0, -1.0]) * half_size
    n = np.array([-1.0, -1.0, 1.0, 1.0]) * half_size
    lon, lat = frame.to_lonlat(e, n)
    return [[float(x), float(y)] for x, y in zip(lon, lat)]


def write_dataset(root, result):
    """Persist the output of :func:`wvstack.simulator.simulate`."""
    from .simulator import granules

    os.makedirs(root, exist_ok=True)
    spec = result["spec"]
    write_text(os.path.join(root, "spec.json"), spec.to_dict())
    for g in granules(result["plan"]):
        path = os.path.join(root, "manifests", g.granule_id + ".json")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as f:
            f.write(serialize_manifest(g))
    for item in result["rendered"]:
        rec = item["record"]
        write_complex(os.path.join(root, rec.raster_uri), item["slc"])
        write_geometry(os.path.join(root, rec.geometry_uri), item["geometry"], item["orbit"])
    if result["truth"]:
        from .simulator import TruthRecord
        with open(os.path.join(root, "truth.csv"), "w", encoding="utf-8") as f:
            f.write(TruthRecord.HEADER + "\n")
            for t in result["truth"]:
                f.write(t.row() + "\n")
    if result.get("renderer") is not None:
        ring = aoi_ring(result["renderer"].frame, float(spec["aoi_half_size_m"]))
        write_text(os.path.join(root, "aoi.json"), {"aoi": ring})


def manifest_paths(root):
    paths = sorted(glob.glob(os.path.join(root, "manifests", "*.json")))
    if not paths:
        raise DataError(f"no manifests under {root}/manifests")
    return paths


def load_manifests(root):
    out = []
    for p in manifest_paths(root):
        with open(p, "rb") as f:
            out.append(parse_manifest(f.read()))
    return out


def load_records(root, rendered_only=False):
    recs = [r for m in load_manifests(root) for r in m.vignettes]
    if rendered_only:
        recs = [r for r in recs if not r.raster_uri.startswith("sim://")]
    return sorted(recs, key=lambda r: (r.sensing_start, r.vignette_id))


def load_scene(root, record):
    """(slc, RadarGeometry, OrbitModel) for a record with a raster payload."""
    geom, orbit = read_geometry(resolve(root, record.geometry_uri))
    slc = read_complex(resolve(root, record.raster_uri), (geom.n_lines, geom.n_samples))
    return slc, geom, orbit


def load_aoi(root):
    path = os.path.join(root, "aoi.json")
    if not os.path.exists(path):
        return None
    return as_polygon(read_text(path)["aoi"])


def load_truth(root):
    import csv
    path = os.path.join(root, "truth.csv")
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
