"""Sentinel-1 WV-mode beam constants and physical constants."""

import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299792458.0
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
GM_EARTH = 3.986004418e14

WAVELENGTH = 0.055466
ANTENNA_LENGTH = 12.3
PRF = 1650.0

# vignette geometry along the orbit
VIGNETTE_SPACING_M = 100e3
SAME_BEAM_SPACING_M = 200e3
VIGNETTE_SIZE_M = 20e3
NOMINAL_GRANULE_RANGE = (15, 160)

REPEAT_INTERVAL_DAYS = 12.0
N_RELATIVE_ORBITS = 175


@dataclass(frozen=True)
class Beam:
    name: str
    bandwidth: float  # Hz
    sampling_rate: float  # Hz
    incidence_min_alt: tuple  # deg, at minimum altitude
    incidence_max_alt: tuple  # deg, at maximum altitude
    look_min_alt: tuple
    look_max_alt: tuple
    nominal_incidence: float  # scene-centre incidence used by the simulator

    @property
    def range_spacing(self):
        return SPEED_OF_LIGHT / (2.0 * self.sampling_rate)

    @property
    def incidence_envelope(self):
        lo = min(self.incidence_min_alt[0], self.incidence_max_alt[0])
        hi = max(self.incidence_min_alt[1], self.incidence_max_alt[1])
        return lo, hi

    @property
    def look_envelope(self):
        lo = min(self.look_min_alt[0], self.look_max_alt[0])
        hi = max(self.look_min_alt[1], self.look_max_alt[1])
        return lo, hi


BEAMS = {
    "WV1": Beam("WV1", 74.5e6, 100.1e6, (23.47, 25.03), (21.68, 23.22),
                (21.03, 22.40), (19.43, 20.79), 23.6),
    "WV2": Beam("WV2", 48.2e6, 54.6e6, (36.67, 37.92), (34.88, 36.13),
                (32.56, 33.62), (30.96, 32.02), 36.6),
}


def phase_to_mm(phase):
    """Convert two-way interferometric phase (rad) to line-of-sight millimetres."""
    return phase * WAVELENGTH / (4.0 * math.pi) * 1000.0


def mm_to_phase(mm):
    return mm / 1000.0 * 4.0 * math.pi / WAVELENGTH
