"""Conformal slicing and 5-axis post-processing for tilt/rotate-bed FFF printers."""

__version__ = "0.1.0"
