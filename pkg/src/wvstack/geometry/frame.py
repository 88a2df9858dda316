"""Ellipsoid helpers, the local planar map frame and the map grid."""

from dataclasses import dataclass

import numpy as np

from ..constants import WGS84_A, WGS84_B


def geodetic_to_ecef(lat, lon, height=0.0, a=WGS84_A, b=WGS84_B):
    lat = np.radians(lat)
    lon = np.radians(lon)
    e2 = 1.0 - (b / a) ** 2
    sl = np.sin(lat)
    n = a / np.sqrt(1.0 - e2 * sl * sl)
    x = (n + height) * np.cos(lat) * np.cos(lon)
    y = (n + height) * np.cos(lat) * np.sin(lon)
    z = (n * (1.0 - e2) + height) * sl
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def ecef_to_geodetic(xyz, a=WGS84_A, b=WGS84_B):
    """Return (lat, lon, height) in degrees/metres using Bowring's iteration."""
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    e2 = 1.0 - (b / a) ** 2
    ep2 = (a / b) ** 2 - 1.0
    p = np.hypot(x, y)
    lon = np.arctan2(y, x)
    beta = np.arctan2(z * a, p * b)
    for _ in range(3):
        sb, cb = np.sin(beta), np.cos(beta)
        lat = np.arctan2(z + ep2 * b * sb ** 3, p - e2 * a * cb ** 3)
        beta = np.arctan2(b * np.sin(lat), a * np.cos(lat))
    sl, cl = np.sin(lat), np.cos(lat)
    n = a / np.sqrt(1.0 - e2 * sl * sl)
    # avoid the p/cos(lat) singularity near the poles
    h = np.where(np.abs(cl) > 1e-3, p / np.where(cl == 0, 1, cl) - n,
                 np.abs(z) / np.where(sl == 0, 1, np.abs(sl)) - n * (1.0 - e2))
    return np.degrees(lat), np.degrees(lon), h


def enu_basis(lat, lon):
    """East, north and up unit vectors (each shape (..., 3)) at geodetic lat/lon."""
    lat = np.radians(lat)
    lon = np.radians(lon)
    sl, cl = np.sin(lat), np.cos(lat)
    so, co = np.sin(lon), np.cos(lon)
    east = np.stack(np.broadcast_arrays(-so, co, np.zeros_like(so)), axis=-1)
    north = np.stack(np.broadcast_arrays(-sl * co, -sl * so, cl), axis=-1)
    up = np.stack(np.broadcast_arrays(cl * co, cl * so, sl), axis=-1)
    return east, north, up


@dataclass(frozen=True)
class LocalFrame:
    """Local planar frame: orthographic projection onto the tangent plane at an origin.

    Map coordinates are (east, north) metres in the plane tangent to the
    ellipsoid at ``(origin_lon, origin_lat)``, shifted by the false origin.
    A map point is lifted to the surface at constant height along the
    origin's vertical, so both directions are closed form.
    """

    origin_lon: float
    origin_lat: float
    false_easting: float = 0.0
    false_northing: float = 0.0

    def _basis(self, height):
        e, n, u = enu_basis(self.origin_lat, self.origin_lon)
        o = geodetic_to_ecef(self.origin_lat, self.origin_lon, height)
        return o, e, n, u

    def to_ecef(self, east, north, height=0.0):
        east = np.asarray(east, dtype=float) - self.false_easting
        north = np.asarray(north, dtype=float) - self.false_northing
        o, e, n, u = self._basis(height)
        t = o + east[..., None] * e + north[..., None] * n
        d = np.array([1.0 / (WGS84_A + height) ** 2] * 2 + [1.0 / (WGS84_B + height) ** 2])
        qa = np.sum(u * u * d)
        qb = np.sum(t * u * d, axis=-1)
        qc = np.sum(t * t * d, axis=-1) - 1.0
        s = -qc / (qb + np.sqrt(qb * qb - qa * qc))
        return t + s[..., None] * u

    def from_ecef(self, xyz, height=0.0):
        o, e, n, _ = self._basis(height)
        rel = np.asarray(xyz, dtype=float) - o
        return rel @ e + self.false_easting, rel @ n + self.false_northing

    def from_lonlat(self, lon, lat, height=0.0):
        return self.from_ecef(geodetic_to_ecef(lat, lon, height), height)

    def to_lonlat(self, east, north, height=0.0):
        lat, lon, _ = ecef_to_geodetic(self.to_ecef(east, north, height))
        return lon, lat

    def to_dict(self):
        return {"kind": "local-orthographic", "origin_lon": self.origin_lon,
                "origin_lat": self.origin_lat, "false_easting": self.false_easting,
                "false_northing": self.false_northing}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["origin_lon"]), float(d["origin_lat"]),
                   float(d.get("false_easting", 0.0)), float(d.get("false_northing", 0.0)))


@dataclass(frozen=True)
class MapGrid:
    """Regular north-up grid in a :class:`LocalFrame`.

    ``east0``/``north0`` locate the centre of cell (row 0, col 0), the
    north-west corner cell. Rows run southward, columns eastward.
    """

    frame: LocalFrame
    posting: float
    n_east: int
    n_north: int
    east0: float
    north0: float

    def __post_init__(self):
        if not self.posting > 0:
            raise ValueError("posting must be positive")
        if self.n_east < 1 or self.n_north < 1:
            raise ValueError("grid must have at least one cell")

    @property
    def shape(self):
        return (self.n_north, self.n_east)

    def east(self, col):
        return self.east0 + np.asarray(col, dtype=float) * self.posting

    def north(self, row):
        return self.north0 - np.asarray(row, dtype=float) * self.posting

    def rowcol(self, east, north):
        """Fractional (row, col) of map coordinates."""
        return ((self.north0 - np.asarray(north, float)) / self.posting,
                (np.asarray(east, float) - self.east0) / self.posting)

    def center(self):
        return (self.east0 + 0.5 * (self.n_east - 1) * self.posting,
                self.north0 - 0.5 * (self.n_north - 1) * self.posting)

    def subgrid(self, row0, col0, n_north, n_east):
        return MapGrid(self.frame, self.posting, n_east, n_north,
                       float(self.east(col0)), float(self.north(row0)))

    def coarsen(self, factor):
        factor = int(factor)
        off = 0.5 * (factor - 1) * self.posting
        return MapGrid(self.frame, self.posting * factor,
                       -(-self.n_east // factor), -(-self.n_north // factor),
                       self.east0 + off, self.north0 - off)

    @classmethod
    def covering(cls, frame, east_min, east_max, north_min, north_max, posting):
        """Smallest grid at ``posting`` whose cell centres span the given box."""
        n_e = int(np.ceil((east_max - east_min) / posting - 1e-9)) + 1
        n_n = int(np.ceil((north_max - north_min) / posting - 1e-9)) + 1
        return cls(frame, float(posting), n_e, n_n, float(east_min), float(north_max))

    def to_dict(self):
        return {"frame": self.frame.to_dict(), "posting": self.posting,
                "n_east": self.n_east, "n_north": self.n_north,
                "east0": self.east0, "north0": self.north0}

    @classmethod
    def from_dict(cls, d):
        return cls(LocalFrame.from_dict(d["frame"]), float(d["posting"]),
                   int(d["n_east"]), int(d["n_north"]), float(d["east0"]), float(d["north0"]))
