"""Zero-Doppler radar geometry: radar <-> ground mapping on a constant-height ellipsoid."""

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..constants import BEAMS, PRF, WAVELENGTH, WGS84_A, WGS84_B
from ..errors import DataError, NoConvergence, NoIntersection
from .frame import ecef_to_geodetic, enu_basis

MAX_NEWTON = 25
DOPPLER_TOL = 1e-10


@dataclass(frozen=True)
class RadarGeometry:
    """Imaging metadata of one SLC raster.

    ``azimuth_start`` is in seconds relative to the epoch of the orbit the
    raster is paired with.
    """

    azimuth_start: float
    azimuth_interval: float
    prf: float
    near_range: float
    range_spacing: float
    wavelength: float
    n_lines: int
    n_samples: int
    beam: str

    def line_time(self, line):
        return self.azimuth_start + np.asarray(line, dtype=float) * self.azimuth_interval

    def slant_range(self, sample):
        return self.near_range + np.asarray(sample, dtype=float) * self.range_spacing

    @property
    def mid_time(self):
        return self.azimuth_start + 0.5 * (self.n_lines - 1) * self.azimuth_interval

    def check(self):
        """Raise :class:`DataError` when the Table-1 beam constraints are violated."""
        problems = []
        if self.beam not in BEAMS:
            problems.append(f"unknown beam {self.beam!r}")
        else:
            rs = BEAMS[self.beam].range_spacing
            if abs(self.range_spacing - rs) > 0.01 * rs:
                problems.append(f"range spacing {self.range_spacing} inconsistent with {self.beam}")
        if abs(self.wavelength - WAVELENGTH) > 1e-9:
            problems.append(f"wavelength {self.wavelength} != {WAVELENGTH}")
        if abs(self.prf - PRF) > 0.1 * PRF:
            problems.append(f"prf {self.prf} outside 10% of {PRF}")
        if self.n_lines < 1 or self.n_samples < 1:
            problems.append("empty raster")
        if problems:
            raise DataError("; ".join(problems))
        return self

    def crop(self, line0, sample0, n_lines, n_samples):
        return replace(self, azimuth_start=float(self.line_time(line0)),
                       near_range=float(self.slant_range(sample0)),
                       n_lines=int(n_lines), n_samples=int(n_samples))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["azimuth_start"]), float(d["azimuth_interval"]), float(d["prf"]),
                   float(d["near_range"]), float(d["range_spacing"]), float(d["wavelength"]),
                   int(d["n_lines"]), int(d["n_samples"]), str(d["beam"]))


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def zero_doppler_solve(orbit, ground, t_guess):
    """Zero-Doppler time and slant range of ECEF point(s) ``ground``.

    Newton iteration on f(t) = V(t).(X - P(t)). Converged when the
    relative Doppler |V.(X-P)| / (|V||X-P|) drops below 1e-10.
    """
    x = np.asarray(ground, dtype=float)
    t = np.broadcast_to(np.asarray(t_guess, dtype=float), x.shape[:-1]).copy()
    lo, hi = orbit.valid_interval
    for _ in range(MAX_NEWTON):
        p, v, a = orbit.interpolate(t, accel=True)
        d = x - p
        f = _dot(v, d)
        fp = _dot(a, d) - _dot(v, v)
        t = t - f / fp
        t = np.clip(t, lo, hi)
        p, v = orbit.interpolate(t)
        d = x - p
        rel = np.abs(_dot(v, d)) / (np.linalg.norm(v, axis=-1) * np.linalg.norm(d, axis=-1))
        if np.all(rel < DOPPLER_TOL):
            return t, np.linalg.norm(d, axis=-1)
    raise NoConvergence(f"zero-Doppler iteration did not converge in {MAX_NEWTON} steps "
                        f"(worst relative Doppler {np.max(rel):.3e})")


def radar_coordinates(geom, orbit, ground, t_guess=None):
    """Fractional (line, sample) of ECEF point(s) under ``geom``."""
    if t_guess is None:
        t_guess = geom.mid_time
    t, r = zero_doppler_solve(orbit, ground, t_guess)
    return (t - geom.azimuth_start) / geom.azimuth_interval, (r - geom.near_range) / geom.range_spacing


def range_doppler_to_ground(orbit, t, slant_range, height=0.0):
    """Right-looking intersection of the zero-Doppler circle with the ellipsoid."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(slant_range, dtype=float)
    t, r = np.broadcast_arrays(t, r)
    p, v = orbit.interpolate(t)
    vhat = v / np.linalg.norm(v, axis=-1)[..., None]
    down = -p + _dot(p, vhat)[..., None] * vhat
    down /= np.linalg.norm(down, axis=-1)[..., None]
    right = np.cross(down, vhat)
    diag = np.array([1.0 / (WGS84_A + height) ** 2] * 2 + [1.0 / (WGS84_B + height) ** 2])

    # spherical first guess using the local radius under the satellite
    pn = np.linalg.norm(p, axis=-1)
    lat, _, _ = ecef_to_geodetic(p)
    phi = np.radians(lat)
    a2, b2 = (WGS84_A + height) ** 2, (WGS84_B + height) ** 2
    rg = np.sqrt(a2 * b2 / (b2 * np.cos(phi) ** 2 + a2 * np.sin(phi) ** 2))
    cosb = (pn ** 2 + r ** 2 - rg ** 2) / (2 * pn * r)
    if np.any(cosb > 1.0):
        raise NoIntersection("slant range shorter than the distance to the surface")
    beta = np.arccos(np.clip(cosb, -1.0, 1.0))
    rr = r[..., None]
    for _ in range(MAX_NEWTON):
        cb, sb = np.cos(beta)[..., None], np.sin(beta)[..., None]
        x = p + rr * (cb * down + sb * right)
        dx = rr * (-sb * down + cb * right)
        f = _dot(x * diag, x) - 1.0
        fp = 2.0 * _dot(x * diag, dx)
        step = f / fp
        beta = beta - step
        if np.all(np.abs(step) < 1e-14):
            break
    else:
        raise NoIntersection("range sphere does not meet the surface")
    cb, sb = np.cos(beta)[..., None], np.sin(beta)[..., None]
    if np.any((beta <= 0) | (beta >= np.pi / 2)):
        raise NoIntersection("no right-looking intersection")
    return p + rr * (cb * down + sb * right)


def radar_to_ground(geom, orbit, line, sample, height=0.0):
    """ECEF point imaged at fractional (line, sample) on the surface at ``height``."""
    return range_doppler_to_ground(orbit, geom.line_time(line), geom.slant_range(sample), height)


def _ground_track(orbit, geom, ground, dt):
    # velocity of the zero-Doppler ground point at fixed slant range (central difference)
    t, r = zero_doppler_solve(orbit, ground, geom.mid_time)
    h = float(np.mean(ecef_to_geodetic(ground)[2]))
    x0 = range_doppler_to_ground(orbit, t - dt, r, h)
    x1 = range_doppler_to_ground(orbit, t + dt, r, h)
    return t, (x1 - x0) / (2 * dt)


def heading_incidence(orbit, geom, ground, track="velocity", dt=0.05):
    """Heading (deg clockwise from north) of the along-track direction and incidence (deg).

    With ``track="velocity"`` the heading is that of the horizontal
    projection of the orbit velocity at zero Doppler. ``track="ground"``
    uses the motion of the imaged ground point at fixed slant range
    instead; on the ellipsoid the two differ by a fraction of a degree,
    and the latter is the direction in which an azimuth timing error
    actually moves the geocoded image.
    """
    ground = np.asarray(ground, dtype=float)
    if track == "ground":
        t, g = _ground_track(orbit, geom, ground, dt)
        p, _ = orbit.interpolate(t)
    elif track == "velocity":
        t, _ = zero_doppler_solve(orbit, ground, geom.mid_time)
        p, g = orbit.interpolate(t)
    else:
        raise ValueError(f"unknown track {track!r}")
    lat, lon, _ = ecef_to_geodetic(ground)
    e, n, u = enu_basis(lat, lon)
    heading = np.degrees(np.arctan2(_dot(g, e), _dot(g, n))) % 360.0
    look = p - ground
    incidence = np.degrees(np.arctan2(np.linalg.norm(np.cross(look, u), axis=-1), _dot(look, u)))
    return heading, incidence


def ground_speed(orbit, geom, ground, dt=0.05):
    """Speed (m/s) of the zero-Doppler ground point at fixed slant range."""
    ground = np.asarray(ground, dtype=float)
    return np.linalg.norm(_ground_track(orbit, geom, ground, dt)[1], axis=-1)
