from .frame import LocalFrame, MapGrid, ecef_to_geodetic, enu_basis, geodetic_to_ecef
from .geocode import GeocodedRaster, geocode, grid_radar_coordinates, resample
from .orbit import OrbitModel
from .radar import (RadarGeometry, ground_speed, heading_incidence, radar_coordinates,
                    radar_to_ground, range_doppler_to_ground, zero_doppler_solve)


def orbit_interpolate(orbit, t):
    """Position and velocity of ``orbit`` at time(s) ``t`` (seconds from the orbit epoch)."""
    return orbit.interpolate(t)


__all__ = [
    "LocalFrame", "MapGrid", "ecef_to_geodetic", "enu_basis", "geodetic_to_ecef",
    "GeocodedRaster", "geocode", "grid_radar_coordinates", "resample", "OrbitModel",
    "RadarGeometry", "ground_speed", "heading_incidence", "radar_coordinates",
    "radar_to_ground", "range_doppler_to_ground", "zero_doppler_solve", "orbit_interpolate",
]
