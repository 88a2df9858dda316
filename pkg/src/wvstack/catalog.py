"""Vignette-level catalog: manifests, spatio-temporal index, stacks and coverage.

Each vignette is indexed on its own footprint rather than on the bounding box
of the granule that packages it, so queries return only scenes that actually
image the area of interest.
"""

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np
import shapely
from shapely.geometry import Polygon

from .constants import NOMINAL_GRANULE_RANGE
from .errors import (InvalidFootprint, InvalidPolygon, MalformedManifest, MissingField,
                     UsageError)
from .timeutil import format_time, parse_time

SATELLITES = ("A", "B")
PASSES = ("ascending", "descending")
BEAMS = ("WV1", "WV2")
POLARIZATIONS = ("VV", "HH")
RECORD_FIELDS = ("vignette_id", "granule_id", "satellite", "relative_orbit", "pass_direction",
                 "beam", "polarization", "sensing_start", "footprint", "raster_uri",
                 "geometry_uri")
FOOTPRINT_DIAGONAL_KM = (20.0, 45.0)


def as_polygon(obj, error=InvalidPolygon):
    """Coerce a shapely polygon or a ring of (lon, lat) pairs to a valid polygon."""
    if isinstance(obj, Polygon):
        poly = obj
    else:
        try:
            pts = [(float(x), float(y)) for x, y in obj]
        except (TypeError, ValueError) as exc:
            raise error(f"not a list of (lon, lat) pairs: {exc}") from exc
        if len(pts) >= 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 3:
            raise error("polygon needs at least 3 vertices")
        poly = Polygon(pts)
    if poly.is_empty or not poly.is_valid or poly.area <= 0:
        raise error("polygon is empty, degenerate or self-intersecting")
    minx, _, maxx, _ = poly.bounds
    if maxx - minx > 180.0:
        raise error("polygon crosses the antimeridian")
    return poly


def _haversine_km(lon1, lat1, lon2, lat2):
    lon1, lat1, lon2, lat2 = map(np.radians, (lon1, lat1, lon2, lat2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * 6371.0088 * np.arcsin(np.sqrt(h))


@dataclass(frozen=True)
class VignetteRecord:
    vignette_id: str
    granule_id: str
    satellite: str
    relative_orbit: int
    pass_direction: str
    beam: str
    polarization: str
    sensing_start: datetime
    footprint: tuple  # four (lon, lat) corners
    raster_uri: str = ""
    geometry_uri: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sensing_start", parse_time(self.sensing_start))
        object.__setattr__(self, "relative_orbit", int(self.relative_orbit))
        object.__setattr__(self, "footprint",
                           tuple((float(x), float(y)) for x, y in self.footprint))
        if self.satellite not in SATELLITES:
            raise MalformedManifest(f"{self.vignette_id}: satellite {self.satellite!r}")
        if self.pass_direction not in PASSES:
            raise MalformedManifest(f"{self.vignette_id}: pass_direction {self.pass_direction!r}")
        if self.beam not in BEAMS:
            raise MalformedManifest(f"{self.vignette_id}: beam {self.beam!r}")
        if self.polarization not in POLARIZATIONS:
            raise MalformedManifest(f"{self.vignette_id}: polarization {self.polarization!r}")
        if not 1 <= self.relative_orbit <= 175:
            raise MalformedManifest(f"{self.vignette_id}: relative_orbit {self.relative_orbit}")
        if len(self.footprint) != 4:
            raise InvalidFootprint(f"{self.vignette_id}: footprint must have 4 corners")
        as_polygon(self.footprint, InvalidFootprint)

    @property
    def polygon(self):
        return Polygon(self.footprint)

    def diagonal_km(self):
        (x0, y0), (x1, y1), (x2, y2), (x3, y3) = self.footprint
        return max(_haversine_km(x0, y0, x2, y2), _haversine_km(x1, y1, x3, y3))

    def nominal_size(self):
        lo, hi = FOOTPRINT_DIAGONAL_KM
        return lo <= self.diagonal_km() <= hi

    def to_dict(self):
        return {"vignette_id": self.vignette_id, "granule_id": self.granule_id,
                "satellite": self.satellite, "relative_orbit": self.relative_orbit,
                "pass_direction": self.pass_direction, "beam": self.beam,
                "polarization": self.polarization,
                "sensing_start": format_time(self.sensing_start),
                "footprint": [list(p) for p in self.footprint],
                "raster_uri": self.raster_uri, "geometry_uri": self.geometry_uri}

    @classmethod
    def from_dict(cls, d, context="vignette"):
        if not isinstance(d, dict):
            raise MalformedManifest(f"{context}: record is not an object")
        for name in RECORD_FIELDS:
            if name not in d:
                raise MissingField(name, context)
        extra = set(d) - set(RECORD_FIELDS)
        if extra:
            raise MalformedManifest(f"{context}: unknown keys {sorted(extra)}")
        try:
            when = parse_time(d["sensing_start"])
        except (TypeError, ValueError) as exc:
            raise MalformedManifest(f"{context}: bad sensing_start: {exc}") from exc
        try:
            orbit = int(d["relative_orbit"])
        except (TypeError, ValueError) as exc:
            raise MalformedManifest(f"{context}: bad relative_orbit") from exc
        fp = d["footprint"]
        if not isinstance(fp, list):
            raise InvalidFootprint(f"{context}: footprint is not a list")
        return cls(str(d["vignette_id"]), str(d["granule_id"]), d["satellite"], orbit,
                   d["pass_direction"], d["beam"], d["polarization"], when, fp,
                   str(d["raster_uri"]), str(d["geometry_uri"]))


@dataclass
class GranuleManifest:
    granule_id: str
    bounding_box: tuple
    vignettes: list
    flags: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.vignettes)


def _bounding_box(records):
    if not records:
        return ()
    u = shapely.union_all([r.polygon for r in records])
    minx, miny, maxx, maxy = u.bounds
    return ((minx, miny), (maxx, miny), (maxx, maxy), (minx, maxy))


def _manifest_flags(manifest):
    flags = []
    lo, hi = NOMINAL_GRANULE_RANGE
    if not lo <= manifest.count <= hi:
        flags.append("vignette-count-out-of-nominal-range")
    if any(not r.nominal_size() for r in manifest.vignettes):
        flags.append("footprint-size-out-of-nominal-range")
    if manifest.bounding_box and manifest.vignettes:
        box = Polygon(manifest.bounding_box).buffer(1e-9)
        if not all(box.covers(r.polygon) for r in manifest.vignettes):
            flags.append("footprint-outside-bounding-box")
    return flags


def parse_manifest(document):
    """Parse a granule manifest document (bytes or str, UTF-8 JSON)."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedManifest(f"manifest is not UTF-8: {exc}") from exc
    try:
        d = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedManifest(str(exc)) from exc
    if not isinstance(d, dict):
        raise MalformedManifest("manifest must be a single object")
    for name in ("granule_id", "vignettes"):
        if name not in d:
            raise MissingField(name, "manifest")
    if not isinstance(d["vignettes"], list):
        raise MalformedManifest("vignettes must be an array")
    records = [VignetteRecord.from_dict(v, f"vignettes[{i}]") for i, v in enumerate(d["vignettes"])]
    if d.get("bounding_box"):
        bbox = tuple(tuple(map(float, p)) for p in d["bounding_box"])
        as_polygon(bbox, InvalidFootprint)
    else:
        bbox = _bounding_box(records)
    m = GranuleManifest(str(d["granule_id"]), bbox, records)
    m.flags = _manifest_flags(m)
    return m


def serialize_manifest(manifest):
    d = {"granule_id": manifest.granule_id,
         "vignettes": [r.to_dict() for r in manifest.vignettes]}
    if manifest.bounding_box:
        d["bounding_box"] = [list(p) for p in manifest.bounding_box]
    return (json.dumps(d, indent=1) + "\n").encode("utf-8")


@dataclass(frozen=True)
class StackKey:
    relative_orbit: int
    beam: str
    pass_direction: str
    anchor_footprint: tuple


class VignetteIndex:
    """Spatial (STR-tree) and temporal index over vignette records.

    Built by a single writer; after construction queries are read-only.
    """

    def __init__(self, records=()):
        self._records = []
        self._by_id = {}
        self._tree = None
        for r in records:
            self.add(r)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __contains__(self, vignette_id):
        return vignette_id in self._by_id

    def get(self, vignette_id):
        return self._by_id[vignette_id]

    def add(self, record):
        if record.vignette_id in self._by_id:
            return False
        self._by_id[record.vignette_id] = record
        self._records.append(record)
        self._tree = None
        return True

    def add_manifest(self, manifest):
        for r in manifest.vignettes:
            self.add(r)

    def _build(self):
        if self._tree is None:
            self._polys = np.array([r.polygon for r in self._records], dtype=object)
            self._tree = shapely.STRtree(self._polys)
            order = sorted(range(len(self._records)),
                           key=lambda i: self._records[i].sensing_start)
            self._time_order = order
            self._times = [self._records[i].sensing_start for i in order]

    def _spatial(self, poly):
        self._build()
        if not self._records:
            return set()
        return set(int(i) for i in self._tree.query(poly, predicate="intersects"))

    def _temporal(self, interval):
        self._build()
        start, end = (None, None) if interval is None else interval
        start = parse_time(start) if start is not None else None
        end = parse_time(end) if end is not None else None
        if start is not None and end is not None and start > end:
            raise UsageError("interval start is after its end")
        lo = 0 if start is None else bisect_left(self._times, start)
        hi = len(self._times) if end is None else bisect_right(self._times, end)
        return set(self._time_order[lo:hi])

    def query(self, aoi, interval=None, beam=None, relative_orbit=None, pass_direction=None):
        """Records whose footprint intersects ``aoi`` and whose start lies in ``interval``."""
        poly = as_polygon(aoi)
        hits = self._spatial(poly) & self._temporal(interval)
        out = [self._records[i] for i in hits]
        out = [r for r in out if _match(r, beam, relative_orbit, pass_direction)]
        return sorted(out, key=lambda r: (r.sensing_start, r.vignette_id))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for r in self._records:
                f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        idx = cls()
        with open(path, encoding="utf-8") as f:
            for n, line in enumerate(f):
                if line.strip():
                    idx.add(VignetteRecord.from_dict(json.loads(line), f"{path}:{n + 1}"))
        return idx


def _match(r, beam, relative_orbit, pass_direction):
    return ((beam is None or r.beam == beam)
            and (relative_orbit is None or r.relative_orbit == relative_orbit)
            and (pass_direction is None or r.pass_direction == pass_direction))


def query(index, aoi, interval=None, beam=None, relative_orbit=None, pass_direction=None):
    return index.query(aoi, interval, beam, relative_orbit, pass_direction)


def overlap_fraction(footprint, anchor):
    a = Polygon(anchor)
    return Polygon(footprint).intersection(a).area / a.area


def group_stacks(records, min_overlap=0.5, min_count=2):
    """Partition records into repeat-pass stacks.

    Records are grouped by (relative_orbit, beam, pass_direction); within a
    group the earliest unassigned record anchors a stack and collects every
    later record overlapping it by at least ``min_overlap`` of the anchor area.
    """
    groups = {}
    for r in sorted(records, key=lambda r: (r.sensing_start, r.vignette_id)):
        groups.setdefault((r.relative_orbit, r.beam, r.pass_direction), []).append(r)
    stacks = []
    for (orbit, beam, pdir), members in sorted(groups.items()):
        remaining = list(members)
        while remaining:
            anchor = remaining[0]
            a = anchor.polygon
            taken, rest = [anchor], []
            for r in remaining[1:]:
                if r.polygon.intersection(a).area >= min_overlap * a.area:
                    taken.append(r)
                else:
                    rest.append(r)
            remaining = rest
            if len(taken) >= min_count:
                stacks.append((StackKey(orbit, beam, pdir, anchor.footprint), taken))
    return stacks


def discover_stacks(index, aoi, min_overlap=0.5, min_count=2):
    if not 0 < min_overlap <= 1:
        raise UsageError("min_overlap must be in (0, 1]")
    if min_count < 2:
        raise UsageError("min_count must be at least 2")
    return group_stacks(index.query(aoi), min_overlap, min_count)


def coverage_stats(index, regions):
    """Per-region counts of intersecting vignettes plus a total row (sum of rows)."""
    if not regions:
        raise UsageError("no regions given")
    items = regions.items() if isinstance(regions, dict) else regions
    rows = []
    for name, poly in items:
        rows.append((name, len(index._spatial(as_polygon(poly)))))
    rows.append(("total", sum(c for _, c in rows)))
    return rows
