"""Synthetic WV-mode acquisitions with known geometry, errors and deformation.

The world is the WGS-84 ellipsoid seen from a circular orbit in an
Earth-fixed frame (no Earth rotation). Repeat passes of a track share the
same true geometry; the injected timing/range errors live only in the
metadata written next to each raster, which is exactly what the stack
workflow has to undo.
"""

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .catalog import GranuleManifest, VignetteRecord, _bounding_box
from .constants import (ANTENNA_LENGTH, BEAMS, GM_EARTH, PRF, REPEAT_INTERVAL_DAYS,
                        VIGNETTE_SIZE_M, VIGNETTE_SPACING_M, WAVELENGTH,
                        WGS84_A, WGS84_B, mm_to_phase)
from .errors import InvalidSpec
from .geometry.frame import LocalFrame, ecef_to_geodetic
from .geometry.orbit import OrbitModel
from .geometry.radar import RadarGeometry, radar_coordinates, radar_to_ground
from .timeutil import add_seconds, format_time, parse_time

MEAN_RADIUS = 6371008.8
STATE_VECTOR_SPACING = 10.0
MAX_TIMING_ERROR_MS = 10.0

DEFAULT_SPEC = {
    "seed": 0,
    "orbit": {"altitude": 693e3, "inclination": 98.18, "raan": 150.0,
              "epoch": "2023-06-01T00:00:00.000000Z"},
    "plan": {"relative_orbits": [38], "passes": ["descending"], "n_vignettes": 10,
             "start_latitude": -20.0, "spacing_m": VIGNETTE_SPACING_M, "first_beam": "WV1",
             "repeat_count": 1, "repeat_interval_days": REPEAT_INTERVAL_DAYS,
             "satellite": "A", "polarization": "VV", "vignettes_per_granule": 0},
    "render": {"vignette_index": None, "crop_lines": 2048, "crop_samples": 2048},
    "scene": {"background_correlation": 1.0, "regions": [], "point_targets": [],
              "change_blobs": []},
    "errors": {"timing_ms": 0.0, "range_m": 0.0, "timing_ms_list": None, "range_m_list": None},
    "deformation": {"rate_mm_per_year": 0.0, "shape": "uniform", "center": [0.0, 0.0],
                    "sigma_m": 500.0},
    "snr_db": None,
    "height": 0.0,
    "aoi_half_size_m": 1500.0,
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class SimulationSpec:
    """Parameters of a synthetic dataset; see ``DEFAULT_SPEC`` for the keys."""

    params: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_SPEC))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d or {}) - set(DEFAULT_SPEC)
        if unknown:
            raise InvalidSpec(f"unknown simulation keys {sorted(unknown)}")
        spec = cls(_merge(DEFAULT_SPEC, d))
        spec.validate()
        return spec

    def to_dict(self):
        return copy.deepcopy(self.params)

    def __getitem__(self, key):
        return self.params[key]

    @property
    def seed(self):
        return int(self.params["seed"])

    def validate(self):
        p = self.params
        plan, err = p["plan"], p["errors"]
        if plan["n_vignettes"] < 1 or plan["repeat_count"] < 1:
            raise InvalidSpec("n_vignettes and repeat_count must be positive")
        if plan["first_beam"] not in BEAMS:
            raise InvalidSpec(f"unknown beam {plan['first_beam']!r}")
        if not plan["relative_orbits"] or any(not 1 <= int(r) <= 175 for r in plan["relative_orbits"]):
            raise InvalidSpec("relative_orbits must be in 1..175")
        if any(d not in ("ascending", "descending") for d in plan["passes"]):
            raise InvalidSpec("passes must be ascending/descending")
        if not 200e3 <= p["orbit"]["altitude"] <= 2000e3:
            raise InvalidSpec("altitude outside LEO range")
        timings = err["timing_ms_list"] or [err["timing_ms"]]
        if any(abs(float(t)) > MAX_TIMING_ERROR_MS for t in timings):
            raise InvalidSpec("timing errors must not exceed 10 ms")
        if plan["spacing_m"] <= 0:
            raise InvalidSpec("spacing_m must be positive")
        return self


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# --- orbits -----------------------------------------------------------------

def circular_state(t, altitude, inclination, raan, u0):
    """Analytic position/velocity of a circular orbit; ``u0`` is the argument of latitude at t=0 (deg)."""
    r = WGS84_A + altitude
    n = math.sqrt(GM_EARTH / r ** 3)
    t = np.asarray(t, dtype=float)
    u = np.radians(u0) + n * t
    i, om = np.radians(inclination), np.radians(raan)
    cu, su = np.cos(u), np.sin(u)
    ci, si, co, so = np.cos(i), np.sin(i), np.cos(om), np.sin(om)
    pos = r * np.stack([cu * co - su * ci * so, cu * so + su * ci * co, su * si], axis=-1)
    vel = r * n * np.stack([-su * co - cu * ci * so, -su * so + cu * ci * co, cu * si], axis=-1)
    return pos, vel


def circular_orbit(epoch, t0, t1, altitude=693e3, inclination=98.18, raan=0.0, u0=0.0,
                   spacing=STATE_VECTOR_SPACING):
    t = np.arange(math.floor(t0 / spacing) * spacing, t1 + spacing, spacing)
    pos, vel = circular_state(t, altitude, inclination, raan, u0)
    return OrbitModel(epoch, t, pos, vel)


def mean_motion(altitude):
    return math.sqrt(GM_EARTH / (WGS84_A + altitude) ** 3)


# --- acquisition plan -------------------------------------------------------

def _centre_slant_range(p, incidence_deg):
    """Slant range giving ``incidence_deg`` on a sphere of the local radius under ``p``."""
    r = np.linalg.norm(p)
    lat = math.radians(float(ecef_to_geodetic(p)[0]))
    a2, b2 = WGS84_A ** 2, WGS84_B ** 2
    rg = math.sqrt(a2 * b2 / (b2 * math.cos(lat) ** 2 + a2 * math.sin(lat) ** 2))
    th = math.radians(incidence_deg)
    look = math.asin(rg * math.sin(th) / r)
    gamma = th - look
    return math.sqrt(r * r + rg * rg - 2 * r * rg * math.cos(gamma)), rg * math.cos(gamma)


def vignette_geometry(orbit, t_centre, beam, size_m=VIGNETTE_SIZE_M, altitude=693e3):
    """Full-vignette radar geometry centred at ``t_centre`` for the beam's nominal incidence."""
    b = BEAMS[beam]
    p, _ = orbit.interpolate(t_centre)
    r_c, rho = _centre_slant_range(p, b.nominal_incidence)
    v_ground = mean_motion(altitude) * rho
    n_samples = int(round(size_m * math.sin(math.radians(b.nominal_incidence)) / b.range_spacing))
    n_lines = int(round(size_m / v_ground * PRF))
    return RadarGeometry(azimuth_start=t_centre - 0.5 * (n_lines - 1) / PRF,
                         azimuth_interval=1.0 / PRF, prf=PRF,
                         near_range=r_c - 0.5 * (n_samples - 1) * b.range_spacing,
                         range_spacing=b.range_spacing, wavelength=WAVELENGTH,
                         n_lines=n_lines, n_samples=n_samples, beam=beam)


def footprint_lonlat(geom, orbit, height=0.0):
    nl, ns = geom.n_lines - 1, geom.n_samples - 1
    corners = radar_to_ground(geom, orbit, np.array([0, 0, nl, nl]), np.array([0, ns, ns, 0]), height)
    lat, lon, _ = ecef_to_geodetic(corners)
    return tuple((float(x), float(y)) for x, y in zip(lon, lat))


@dataclass
class PlannedVignette:
    record: VignetteRecord
    geometry: RadarGeometry  # true geometry of the full vignette
    orbit: OrbitModel
    cycle: int
    index: int  # position along the pass


def _pass_start_u(pass_direction, start_latitude, inclination):
    # argument of latitude where the sub-satellite latitude equals start_latitude
    s = math.sin(math.radians(start_latitude)) / math.sin(math.radians(inclination))
    if abs(s) > 1:
        raise InvalidSpec("start_latitude not reachable for this inclination")
    u = math.degrees(math.asin(s))
    return u if pass_direction == "ascending" else 180.0 - u


def synth_plan(spec):
    """Leapfrog acquisition plan: vignettes every ``spacing_m`` along track, beams alternating."""
    if not isinstance(spec, SimulationSpec):
        spec = SimulationSpec.from_dict(spec)
    p = spec.params
    ob, plan = p["orbit"], p["plan"]
    alt, inc = float(ob["altitude"]), float(ob["inclination"])
    n = mean_motion(alt)
    dt = float(plan["spacing_m"]) / (n * MEAN_RADIUS)
    epoch0 = parse_time(ob["epoch"])
    period = 2 * math.pi / n
    beams = list(BEAMS) if plan["first_beam"] == "WV1" else list(BEAMS)[::-1]
    out = []
    per_granule = int(plan.get("vignettes_per_granule") or 0)
    for oi, rel in enumerate(plan["relative_orbits"]):
        raan = float(ob["raan"]) + (int(rel) - 1) * 360.0 / 175.0
        for pi_, pdir in enumerate(plan["passes"]):
            u0 = _pass_start_u(pdir, float(plan["start_latitude"]), inc)
            t_last = (plan["n_vignettes"] - 1) * dt
            base_orbit = circular_orbit(epoch0, -60.0, t_last + 60.0, alt, inc, raan, u0)
            for cycle in range(int(plan["repeat_count"])):
                offset = (cycle * float(plan["repeat_interval_days"]) * 86400.0
                          + (oi * len(plan["passes"]) + pi_) * period)
                epoch = add_seconds(epoch0, offset)
                orbit = base_orbit.shifted(epoch)
                for k in range(int(plan["n_vignettes"])):
                    beam = beams[k % 2]
                    geom = vignette_geometry(orbit, k * dt, beam, altitude=alt)
                    start = add_seconds(epoch, geom.azimuth_start)
                    g = k // per_granule if per_granule else 0
                    granule = (f"S1{plan['satellite']}_WV_SLC__1SSV_{start_of(epoch)}"
                               f"_{int(rel):03d}_{pdir[0].upper()}_{g:02d}")
                    vid = (f"S1{plan['satellite']}_WV_{int(rel):03d}{pdir[0].upper()}"
                           f"_{start.strftime('%Y%m%dT%H%M%S%f')}_{beam}_{k:03d}")
                    rec = VignetteRecord(
                        vignette_id=vid, granule_id=granule, satellite=plan["satellite"],
                        relative_orbit=int(rel), pass_direction=pdir, beam=beam,
                        polarization=plan["polarization"], sensing_start=start,
                        footprint=footprint_lonlat(geom, orbit),
                        raster_uri=f"sim://unrendered/{vid}", geometry_uri="")
                    out.append(PlannedVignette(rec, geom, orbit, cycle, k))
    return out


def start_of(epoch):
    return parse_time(epoch).strftime("%Y%m%dT%H%M%S")


def granules(plan):
    """Group planned vignettes into granule manifests (one per datatake unless split)."""
    by = {}
    for pv in plan:
        by.setdefault(pv.record.granule_id, []).append(pv.record)
    out = []
    for gid, recs in by.items():
        out.append(GranuleManifest(gid, _bounding_box(recs), recs))
    return out


# --- scene rendering --------------------------------------------------------

def _spectral_window(n, fraction):
    f = np.fft.fftfreq(n)
    return (np.abs(f) <= 0.5 * fraction).astype(float)


class SceneRenderer:
    """Renders repeat SLCs of one cropped vignette in its true radar geometry.

    Ground positions of the radar pixels are expressed in a local frame
    centred on the crop centre; scene features (regions, targets, blobs,
    deformation) are specified in that frame in metres.
    """

    def __init__(self, geometry, orbit, scene=None, crop=None, seed=0, height=0.0):
        scene = _merge(DEFAULT_SPEC["scene"], scene or {})
        if crop is None:
            crop = (min(2048, geometry.n_lines), min(2048, geometry.n_samples))
        nl, ns = int(crop[0]), int(crop[1])
        if nl > geometry.n_lines or ns > geometry.n_samples:
            raise InvalidSpec("crop larger than the vignette")
        l0 = (geometry.n_lines - nl) // 2
        s0 = (geometry.n_samples - ns) // 2
        self.geometry = geometry.crop(l0, s0, nl, ns)
        self.orbit = orbit
        self.scene = scene
        self.seed = seed
        self.height = height
        g = self.geometry
        centre = radar_to_ground(g, orbit, 0.5 * (nl - 1), 0.5 * (ns - 1), height)
        lat, lon, _ = ecef_to_geodetic(centre)
        self.frame = LocalFrame(float(lon), float(lat))
        self.east, self.north = self._pixel_ground(g, orbit)
        b = BEAMS[g.beam]
        v = np.linalg.norm(orbit.interpolate(g.mid_time)[1])
        az_frac = min(1.0, 2.0 * v / ANTENNA_LENGTH / g.prf * 0.85)
        self.window = (_spectral_window(nl, az_frac)[:, None]
                       * _spectral_window(ns, b.bandwidth / b.sampling_rate)[None, :])
        self.base = self._speckle(_rng(seed, 1))
        self.targets = self._point_targets()
        self.correlation = self._region_field()

    def _pixel_ground(self, g, orbit, step=32):
        ll = np.unique(np.r_[np.arange(0, g.n_lines, step), g.n_lines - 1])
        ss = np.unique(np.r_[np.arange(0, g.n_samples, step), g.n_samples - 1])
        L, S = np.meshgrid(ll, ss, indexing="ij")
        xyz = radar_to_ground(g, orbit, L, S, self.height)
        e, n = self.frame.from_ecef(xyz, self.height)
        li, si = np.arange(g.n_lines), np.arange(g.n_samples)
        east = RectBivariateSpline(ll, ss, e)(li, si)
        north = RectBivariateSpline(ll, ss, n)(li, si)
        return east, north

    def _speckle(self, rng):
        nl, ns = self.window.shape
        white = (rng.standard_normal((nl, ns)) + 1j * rng.standard_normal((nl, ns))) / math.sqrt(2)
        field_ = np.fft.ifft2(np.fft.fft2(white) * self.window)
        return field_ / math.sqrt(self.window.mean())

    def ground_to_radar(self, east, north):
        xyz = self.frame.to_ecef(np.asarray(east, float), np.asarray(north, float), self.height)
        return radar_coordinates(self.geometry, self.orbit, xyz)

    def _point_targets(self):
        pts = self.scene["point_targets"]
        if not pts:
            return None
        nl, ns = self.window.shape
        fl = np.fft.fftfreq(nl)[:, None]
        fs = np.fft.fftfreq(ns)[None, :]
        spec = np.zeros((nl, ns), dtype=complex)
        for e, n, amp_db in pts:
            line, sample = self.ground_to_radar(e, n)
            amp = 10 ** (amp_db / 20.0)
            spec += amp * np.exp(-2j * np.pi * (fl * line + fs * sample))
        return np.fft.ifft2(spec * self.window) / self.window.mean()

    def _inside(self, centre, radius):
        return (self.east - centre[0]) ** 2 + (self.north - centre[1]) ** 2 <= radius ** 2

    def _region_field(self):
        rho = np.full(self.east.shape, float(self.scene["background_correlation"]))
        for reg in self.scene["regions"]:
            rho[self._inside(reg["center"], reg["radius"])] = float(reg["correlation"])
        return np.clip(rho, 0.0, 1.0)

    def deformation_mm(self, deformation, years):
        d = _merge(DEFAULT_SPEC["deformation"], deformation or {})
        amp = float(d["rate_mm_per_year"]) * years
        if d["shape"] == "uniform":
            return np.full(self.east.shape, amp)
        if d["shape"] == "gaussian":
            c, s = d["center"], float(d["sigma_m"])
            r2 = (self.east - c[0]) ** 2 + (self.north - c[1]) ** 2
            return amp * np.exp(-0.5 * r2 / s ** 2)
        raise InvalidSpec(f"unknown deformation shape {d['shape']!r}")

    def render(self, epoch_index, years=0.0, deformation=None, snr_db=None):
        """Complex SLC for one epoch under the true geometry."""
        rho = self.correlation
        slc = self.base.copy()
        if np.any(rho < 1.0):
            fresh = self._speckle(_rng(self.seed, 2, epoch_index))
            slc = np.sqrt(rho) * slc + np.sqrt(1.0 - rho) * fresh
        if self.targets is not None:
            slc = slc + self.targets
        for blob in self.scene["change_blobs"]:
            if int(blob["epoch"]) == epoch_index:
                gain = 10 ** (float(blob["gain_db"]) / 20.0)
                slc[self._inside(blob["center"], blob["radius"])] *= gain
        if deformation is not None:
            slc = slc * np.exp(1j * mm_to_phase(self.deformation_mm(deformation, years)))
        if snr_db is not None and np.isfinite(snr_db):
            rng = _rng(self.seed, 3, epoch_index)
            sigma = math.sqrt(10 ** (-snr_db / 10.0) / 2.0)
            slc = slc + sigma * (rng.standard_normal(slc.shape) + 1j * rng.standard_normal(slc.shape))
        return slc.astype(np.complex64)


@dataclass
class TruthRecord:
    vignette_id: str
    epoch_index: int
    sensing_start: str
    timing_error_ms: float
    range_error_m: float
    snr_db: float
    deformation_mm_at_origin: float
    origin_lon: float
    origin_lat: float

    HEADER = ("vignette_id,epoch_index,sensing_start,timing_error_ms,range_error_m,snr_db,"
              "deformation_mm_at_origin,origin_lon,origin_lat")

    def row(self):
        return (f"{self.vignette_id},{self.epoch_index},{self.sensing_start},"
                f"{self.timing_error_ms!r},{self.range_error_m!r},{self.snr_db!r},"
                f"{self.deformation_mm_at_origin!r},{self.origin_lon!r},{self.origin_lat!r}")


def perturb(geometry, timing_error_ms, range_error_m):
    """Metadata as written by a processor with the given timing and range errors."""
    return replace(geometry, azimuth_start=geometry.azimuth_start + timing_error_ms / 1000.0,
                   near_range=geometry.near_range + range_error_m)


def synth_slc(record, geometry, orbit, scene=None, error=(0.0, 0.0), deformation=None,
              snr_db=None, crop=None, epoch_index=0, years=0.0, seed=0, renderer=None):
    """Render one SLC; returns (slc, metadata geometry with injected error, truth record).

    ``renderer`` may be passed to reuse the scene (and its shared speckle)
    across the epochs of a stack.
    """
    if renderer is None:
        renderer = SceneRenderer(geometry, orbit, scene, crop, seed)
    slc = renderer.render(epoch_index, years, deformation, snr_db)
    dt_ms, dr_m = float(error[0]), float(error[1])
    if abs(dt_ms) > MAX_TIMING_ERROR_MS:
        raise InvalidSpec("timing error above 10 ms")
    meta = perturb(renderer.geometry, dt_ms, dr_m)
    d0 = 0.0
    if deformation is not None:
        d0 = float(renderer.deformation_mm(deformation, years)[renderer.geometry.n_lines // 2,
                                                                 renderer.geometry.n_samples // 2])
    truth = TruthRecord(record.vignette_id, epoch_index, format_time(record.sensing_start),
                        dt_ms, dr_m, float("inf") if snr_db is None else float(snr_db), d0,
                        renderer.frame.origin_lon, renderer.frame.origin_lat)
    return slc, meta, truth


# --- whole dataset ----------------------------------------------------------

def draw_errors(spec, n):
    e = spec["errors"]
    if e["timing_ms_list"] is not None:
        dt = [float(x) for x in e["timing_ms_list"]]
    else:
        rng = _rng(spec.seed, 4)
        dt = list(rng.uniform(-e["timing_ms"], e["timing_ms"], n))
    if e["range_m_list"] is not None:
        dr = [float(x) for x in e["range_m_list"]]
    else:
        rng = _rng(spec.seed, 5)
        dr = list(rng.uniform(-e["range_m"], e["range_m"], n))
    if len(dt) < n or len(dr) < n:
        raise InvalidSpec("error lists shorter than the number of rendered scenes")
    return dt[:n], dr[:n]


def simulate(spec, outdir=None):
    """Build the plan, render the selected vignette across all repeats and optionally write it.

    Returns a dict with the plan, the rendered members (record, slc,
    metadata geometry, orbit) and the truth records.
    """
    from . import dataset
    if not isinstance(spec, SimulationSpec):
        spec = SimulationSpec.from_dict(spec)
    plan = synth_plan(spec)
    p = spec.params
    vi = p["render"]["vignette_index"]
    rendered = []
    truths = []
    renderer = None
    if vi is not None:
        chosen = [pv for pv in plan if pv.index == int(vi)
                  and pv.record.relative_orbit == int(p["plan"]["relative_orbits"][0])
                  and pv.record.pass_direction == p["plan"]["passes"][0]]
        dts, drs = draw_errors(spec, len(chosen))
        t_first = chosen[0].record.sensing_start if chosen else None
        crop = (p["render"]["crop_lines"], p["render"]["crop_samples"])
        for k, pv in enumerate(chosen):
            if renderer is None:
                renderer = SceneRenderer(pv.geometry, pv.orbit, p["scene"], crop, spec.seed,
                                         p["height"])
            years = (pv.record.sensing_start - t_first).total_seconds() / (365.25 * 86400.0)
            slc, meta, truth = synth_slc(pv.record, pv.geometry, pv.orbit, error=(dts[k], drs[k]),
                                         deformation=p["deformation"], snr_db=p["snr_db"],
                                         epoch_index=k, years=years, renderer=renderer)
            vid = pv.record.vignette_id
            pv.record = replace(pv.record, raster_uri=f"slc/{vid}.slc",
                                geometry_uri=f"geom/{vid}.json")
            rendered.append({"record": pv.record, "slc": slc, "geometry": meta, "orbit": pv.orbit})
            truths.append(truth)
    result = {"spec": spec, "plan": plan, "rendered": rendered, "truth": truths,
              "renderer": renderer}
    if outdir is not None:
        dataset.write_dataset(outdir, result)
    return result
