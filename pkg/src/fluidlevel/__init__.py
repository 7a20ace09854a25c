"""Fluid volume in culture-plate wells from the apparent size of an LED.

The LED above a well appears closer as the fluid column under it deepens,
so its image on a camera below grows. The package models that optics,
renders synthetic camera frames, measures the spot by ellipse fitting,
filters the readings, and calibrates spot perimeter against volume.
"""

__version__ = "0.1.0"
