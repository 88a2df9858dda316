"""Shared builders for test data."""

import math
from datetime import datetime, timedelta, timezone

import numpy as np

from wvstack.catalog import GranuleManifest, VignetteRecord

T0 = datetime(2023, 1, 1, tzinfo=timezone.utc)


def square_footprint(lon, lat, size_km=20.0, angle_deg=0.0):
    """Four (lon, lat) corners of a size_km square centred at (lon, lat), rotated by angle."""
    h = size_km / 2.0
    km_lat = 111.32
    km_lon = 111.32 * math.cos(math.radians(lat))
    a = math.radians(angle_deg)
    out = []
    for dx, dy in ((-h, -h), (h, -h), (h, h), (-h, h)):
        x = dx * math.cos(a) - dy * math.sin(a)
        y = dx * math.sin(a) + dy * math.cos(a)
        out.append((lon + x / km_lon, lat + y / km_lat))
    return tuple(out)


def record(vid, lon=0.0, lat=0.0, when=T0, beam="WV1", orbit=1, pass_direction="descending",
           granule="G", size_km=20.0, angle=0.0, satellite="A"):
    return VignetteRecord(vid, granule, satellite, orbit, pass_direction, beam, "VV", when,
                          square_footprint(lon, lat, size_km, angle), f"slc/{vid}.slc",
                          f"geom/{vid}.json")


def random_records(n, seed=0, box=(-20.0, -35.0, 50.0, 35.0), n_orbits=175, jitter_km=15.0):
    """Randomised records over ``box`` with repeat-pass clustering.

    About a third of the records are repeats of earlier footprints, moved by
    up to ``jitter_km`` so that overlap fractions around the grouping
    threshold occur.
    """
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = box
    recs = []
    for i in range(n):
        if recs and rng.random() < 0.35:
            base = recs[int(rng.integers(len(recs)))]
            (bx, by) = np.mean(base.footprint, axis=0)
            d = rng.uniform(-jitter_km, jitter_km, 2)
            lon = bx + d[0] / (111.32 * math.cos(math.radians(by)))
            lat = by + d[1] / 111.32
            beam, orbit, pdir = base.beam, base.relative_orbit, base.pass_direction
        else:
            lon, lat = rng.uniform(x0, x1), rng.uniform(y0, y1)
            beam = "WV1" if rng.random() < 0.5 else "WV2"
            orbit = int(rng.integers(1, n_orbits + 1))
            pdir = "ascending" if rng.random() < 0.5 else "descending"
        when = T0 + timedelta(seconds=float(rng.uniform(0, 365 * 86400)),
                              microseconds=int(rng.integers(0, 1_000_000)))
        recs.append(record(f"V{i:06d}", lon, lat, when, beam, orbit, pdir, granule=f"G{i // 60:04d}",
                           angle=float(rng.uniform(-15, 15))))
    return recs


def manifest(records, granule_id="G"):
    return GranuleManifest(granule_id, (), list(records))
