"""Three-step generation of coregistered geocoded stacks, plus composites.

Step 1 geocodes every member independently onto a shared map grid. Step 2
measures bulk amplitude offsets between member pairs, solves the offset
network and rotates the per-scene map offsets into along-track time and
slant range. Step 3 corrects each member's metadata and geocodes again.
"""

import math
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coregistration as coreg
from .catalog import as_polygon
from .errors import GridDisjoint, GridMismatch, MemberNotInStack, StackTooSmall
from .geometry.frame import LocalFrame, MapGrid
from .geometry.geocode import geocode
from .geometry.io import read_raster, read_text, write_raster, write_text
from .geometry.radar import ground_speed, heading_incidence
from .timeutil import format_time, parse_time

DEFAULT_POSTING = 2.5


@dataclass
class StackMember:
    vignette_id: str
    sensing_start: object  # datetime
    raster: str  # stem relative to the stack directory
    offset: coreg.SceneOffset

    def to_dict(self):
        o = self.offset
        return {"vignette_id": self.vignette_id, "sensing_start": format_time(self.sensing_start),
                "raster": self.raster,
                "offset": {"dt_azimuth_ms": o.dt_azimuth, "d_range_m": o.d_range,
                           "d_east_m": o.d_east, "d_north_m": o.d_north,
                           "residual_m": o.residual, "flags": list(o.flags)}}

    @classmethod
    def from_dict(cls, d):
        o = d["offset"]
        off = coreg.SceneOffset(d["vignette_id"], o["d_east_m"], o["d_north_m"], o["residual_m"],
                                o["dt_azimuth_ms"], o["d_range_m"], list(o.get("flags", [])))
        return cls(d["vignette_id"], parse_time(d["sensing_start"]), d["raster"], off)


@dataclass
class StackManifest:
    stack_id: str
    grid: MapGrid
    members: list
    reference: str
    directory: str = ""
    qa: dict = field(default_factory=dict)

    def member(self, vid):
        for m in self.members:
            if m.vignette_id == vid:
                return m
        raise MemberNotInStack(f"{vid!r} is not a member of stack {self.stack_id}")

    def raster(self, vid):
        return read_raster(os.path.join(self.directory, self.member(vid).raster))

    @property
    def ids(self):
        return [m.vignette_id for m in self.members]

    def to_dict(self):
        return {"stack_id": self.stack_id, "grid": self.grid.to_dict(), "reference": self.reference,
                "members": [m.to_dict() for m in self.members], "qa": self.qa}

    def save(self, directory=None):
        directory = directory or self.directory
        write_text(os.path.join(directory, "manifest.json"), self.to_dict())

    @classmethod
    def load(cls, directory):
        d = read_text(os.path.join(directory, "manifest.json"))
        return cls(d["stack_id"], MapGrid.from_dict(d["grid"]),
                   [StackMember.from_dict(m) for m in d["members"]], d["reference"],
                   directory, d.get("qa", {}))


def aoi_grid(aoi, posting=DEFAULT_POSTING):
    """Map grid covering ``aoi`` in a local frame centred on it, snapped to whole postings."""
    poly = as_polygon(aoi)
    c = poly.centroid
    frame = LocalFrame(round(c.x, 9), round(c.y, 9))
    lon, lat = np.asarray(poly.exterior.coords).T
    e, n = frame.from_lonlat(lon, lat)
    snap = lambda v, f: float(f(v / posting) * posting)  # noqa: E731
    return MapGrid.covering(frame, snap(e.min(), math.floor), snap(e.max(), math.ceil),
                            snap(n.min(), math.floor), snap(n.max(), math.ceil), posting)


def _map_pool(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def stack_id_for(rec):
    return (f"T{rec.relative_orbit:03d}{rec.pass_direction[0].upper()}_{rec.beam}"
            f"_{rec.sensing_start.strftime('%Y%m%dT%H%M%S')}")


@dataclass
class Coregistration:
    """Outcome of steps 1 and 2 for a set of members."""

    grid: MapGrid
    scenes: list  # (record, slc, geometry, orbit, stage-1 raster), time ordered
    reference: str
    pairs: list
    edges: list
    network: coreg.OffsetNetwork
    offsets: list
    dropped: list

    @property
    def ids(self):
        return [s[0].vignette_id for s in self.scenes]


def coregister_members(members, aoi, posting=DEFAULT_POSTING, *, load, out_dir, window=coreg.MIN_WINDOW,
                       k=3, reference=None, height=0.0, jobs=1, allow_small_window=False, grid=None):
    """Steps 1 and 2: independent geocoding, pair offsets, network solution in radar terms.

    Stage-1 rasters are written under ``out_dir/stage1`` and the edge and
    offset tables under ``out_dir/qa``.
    """
    members = sorted(members, key=lambda r: (r.sensing_start, r.vignette_id))
    if len(members) < 2:
        raise StackTooSmall(f"stack needs at least 2 members, got {len(members)}")
    grid = grid or aoi_grid(aoi, posting)
    os.makedirs(os.path.join(out_dir, "qa"), exist_ok=True)

    def stage1(rec):
        slc, geom, orbit = load(rec)
        try:
            ras = geocode(slc, geom, orbit, grid, height)
        except GridDisjoint:
            return rec, None, None, None, None
        write_raster(os.path.join(out_dir, "stage1", rec.vignette_id), ras,
                     {"vignette_id": rec.vignette_id, "stage": 1})
        return rec, slc, geom, orbit, ras

    done = [s for s in _map_pool(stage1, members, jobs) if s[4] is not None]
    dropped = sorted(set(r.vignette_id for r in members) - set(s[0].vignette_id for s in done))
    if len(done) < 2:
        raise StackTooSmall(f"only {len(done)} member(s) overlap the AOI grid")
    ids = [s[0].vignette_id for s in done]
    ref = reference or ids[0]
    if ref not in ids:
        raise MemberNotInStack(f"reference {ref!r} is not a usable member")

    times = [(s[0].sensing_start - done[0][0].sensing_start).total_seconds() for s in done]
    pairs = coreg.select_pairs(times, k=k, reference=ids.index(ref))
    rasters = {s[0].vignette_id: s[4] for s in done}
    edges = _measure_pairs(rasters, pairs, ids, window, allow_small_window, jobs)
    network = coreg.OffsetNetwork(ids, edges, ref)
    solved = {o.scene: o for o in coreg.invert_network(network)}
    offsets = []
    for rec, slc, geom, orbit, ras in done:
        vid = rec.vignette_id
        centres = [e.window_center for e in edges if vid in (e.scene_a, e.scene_b)]
        ce, cn = np.mean(centres, axis=0) if centres else grid.center()
        ground = grid.frame.to_ecef(ce, cn, height)
        heading, incidence = heading_incidence(orbit, geom, ground, track="ground")
        vg = ground_speed(orbit, geom, ground)
        offsets.append(coreg.to_radar_offset(solved[vid], float(heading), float(incidence), float(vg)))
    coreg.write_edge_table(os.path.join(out_dir, "qa", "edges.csv"), edges)
    coreg.write_offset_table(os.path.join(out_dir, "qa", "offsets.csv"), offsets)
    return Coregistration(grid, done, ref, pairs, edges, network, offsets, dropped)


def generate_stack(members, aoi, posting=DEFAULT_POSTING, *, load, out_dir, window=coreg.MIN_WINDOW,
                   k=3, reference=None, height=0.0, jobs=1, keep_stage1=True,
                   allow_small_window=False, grid=None):
    """Run the three-step workflow and write the stack under ``out_dir``.

    ``load(record)`` returns ``(slc, RadarGeometry, OrbitModel)`` for a
    member. The reference defaults to the earliest member. Returns the
    :class:`StackManifest`, whose ``qa`` holds edge, offset and residual
    summaries; the same tables are written to ``out_dir/qa``.
    """
    co = coregister_members(members, aoi, posting, load=load, out_dir=out_dir, window=window, k=k,
                            reference=reference, height=height, jobs=jobs,
                            allow_small_window=allow_small_window, grid=grid)
    grid = co.grid
    by_id = {o.scene: o for o in co.offsets}

    # step 3: corrected metadata, second geocoding
    def stage3(item):
        rec, slc, geom, orbit, _ = item
        corrected = coreg.apply_offsets(geom, by_id[rec.vignette_id])
        ras = geocode(slc, corrected, orbit, grid, height)
        write_raster(os.path.join(out_dir, rec.vignette_id), ras,
                     {"vignette_id": rec.vignette_id, "stage": 3})
        return ras

    final = dict(zip(co.ids, _map_pool(stage3, co.scenes, jobs)))
    residuals = _measure_pairs(final, co.pairs, co.ids, window, allow_small_window, jobs)
    _write_residuals(os.path.join(out_dir, "qa", "residuals.csv"), residuals, grid.posting)
    if not keep_stage1:
        shutil.rmtree(os.path.join(out_dir, "stage1"), ignore_errors=True)

    out = StackManifest(
        stack_id_for(co.scenes[0][0]), grid,
        [StackMember(rec.vignette_id, rec.sensing_start, rec.vignette_id, by_id[rec.vignette_id])
         for rec, *_ in co.scenes],
        co.reference, out_dir)
    res_px = [math.hypot(e.d_east, e.d_north) / grid.posting for e in residuals]
    out.qa = {"posting_m": grid.posting, "n_members": len(co.scenes), "dropped_members": co.dropped,
              "n_pairs": len(co.pairs), "n_edges": len(co.edges),
              "n_usable_edges": len(co.network.usable_edges()),
              "max_network_residual_m": max(o.residual for o in co.offsets),
              "max_abs_dt_azimuth_ms": max(abs(o.dt_azimuth) for o in co.offsets),
              "max_residual_shift_px": max(res_px) if res_px else None,
              "flags": sorted({f for o in co.offsets for f in o.flags})}
    out.save()
    return out


def _measure_pairs(rasters, pairs, ids, window, allow_small_window, jobs):
    def measure(pair):
        a, b = ids[pair[0]], ids[pair[1]]
        try:
            return coreg.measure_pair(rasters[a], rasters[b], window_size=window, scene_a=a,
                                      scene_b=b, allow_small_window=allow_small_window)
        except (coreg.InsufficientOverlap, coreg.AllWindowsRejected):
            return None
    return [e for e in _map_pool(measure, pairs, jobs) if e is not None]


def _write_residuals(path, residuals, posting):
    with open(path, "w", encoding="utf-8") as f:
        f.write("scene_a,scene_b,d_east,d_north,shift_px,peak\n")
        for e in residuals:
            f.write(f"{e.scene_a},{e.scene_b},{e.d_east!r},{e.d_north!r},"
                    f"{math.hypot(e.d_east, e.d_north) / posting!r},{e.peak_correlation!r}\n")


def check_conformance(directory):
    """List of problems with a stack directory; empty when every member matches the manifest grid."""
    problems = []
    try:
        d = read_text(os.path.join(directory, "manifest.json"))
    except OSError as exc:
        return [f"manifest unreadable: {exc}"]
    grid_dict = d["grid"]
    times = []
    for m in d["members"]:
        stem = os.path.join(directory, m["raster"])
        try:
            meta = read_text(stem + ".json")
        except OSError:
            problems.append(f"{m['vignette_id']}: raster sidecar missing")
            continue
        if meta.get("grid") != grid_dict:
            problems.append(f"{m['vignette_id']}: grid metadata differs from manifest")
        n = grid_dict["n_east"] * grid_dict["n_north"]
        for ext, size in ((".slc", 8 * n), (".mask", n)):
            if not os.path.exists(stem + ext) or os.path.getsize(stem + ext) != size:
                problems.append(f"{m['vignette_id']}: {ext} payload missing or wrong size")
        times.append(m["sensing_start"])
        if m["vignette_id"] == d["reference"]:
            o = m["offset"]
            if o["dt_azimuth_ms"] != 0 or o["d_range_m"] != 0:
                problems.append("reference member has a nonzero applied offset")
    if times != sorted(times):
        problems.append("members are not sorted by acquisition time")
    if d["reference"] not in [m["vignette_id"] for m in d["members"]]:
        problems.append("reference is not a member")
    return problems


# --- composites -------------------------------------------------------------

def rgb_composite(stack, dates, stretch=(2.0, 98.0)):
    """8-bit RGB image from the dB amplitude of three members (R, G, B in ``dates`` order)."""
    if len(dates) != 3 or len(set(dates)) != 3:
        raise MemberNotInStack("composite needs three distinct members")
    bands = []
    for vid in dates:
        ras = stack.raster(vid) if isinstance(stack, StackManifest) else stack[vid]
        bands.append(stretch_band(ras.amplitude, ras.mask, stretch))
    return np.stack(bands, axis=-1)


def stretch_band(amplitude, mask, stretch=(2.0, 98.0)):
    db = 20.0 * np.log10(np.maximum(np.asarray(amplitude, dtype=float), 1e-12))
    out = np.zeros(db.shape, dtype=np.uint8)
    if not mask.any():
        return out
    lo, hi = np.percentile(db[mask], stretch)
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    v = np.clip((db - lo) * scale, 0, 255)
    out[mask] = np.rint(v[mask]).astype(np.uint8)
    return out


def write_png(path, image):
    from PIL import Image
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def check_grids(rasters):
    grids = {r.grid for r in rasters}
    if len(grids) > 1:
        raise GridMismatch("rasters do not share one grid")
