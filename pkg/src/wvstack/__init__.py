"""Vignette catalog, geocoding, map-coordinate stack coregistration and deformation time series."""

__version__ = "0.1.0"
