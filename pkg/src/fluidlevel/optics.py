"""Geometric optics of a light source viewed upward through a fluid column.

A camera at the measurement plane looks up through ``h1`` of air, a fluid
layer of depth ``L`` and the remaining air gap to an LED at height ``h``.
Refraction at the two flat fluid interfaces shifts the apparent distance of
the LED, which in turn changes the size of its image on the sensor.

Angles are in radians and lengths in millimetres throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    DegenerateProjection,
    InvalidAngle,
    OutOfRange,
    TotalInternalReflection,
)

__all__ = [
    "WellGeometry",
    "MediumPair",
    "TransferConstants",
    "RayPath",
    "CameraModel",
    "snell_refract",
    "transfer_constants",
    "volume_to_level",
    "level_to_volume",
    "apparent_distance_exact",
    "apparent_distance_paraxial",
    "expected_spot_radius",
]


@dataclass(frozen=True)
class WellGeometry:
    """Physical layout of one well under the LED.

    Defaults describe a 24-well plate well (radius 7.8 mm) filled to the rim
    at 2.6 ml, with the LED 60 mm above the measurement plane.
    """

    source_height_h: float = 60.0
    bottom_offset_h1: float = 5.0
    well_radius: float = 7.8
    well_depth: float = 14.0
    capacity: float = 2.6

    def __post_init__(self):
        for name in ("source_height_h", "bottom_offset_h1", "well_radius",
                     "well_depth", "capacity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.source_height_h <= self.bottom_offset_h1:
            raise ValueError("source_height_h must exceed bottom_offset_h1")
        if self.well_depth * self.cross_section < self.capacity * 1000.0 * (1 - 1e-12):
            raise ValueError("well is too shallow to hold its stated capacity")

    @property
    def cross_section(self) -> float:
        """Horizontal cross-section area in mm^2."""
        return math.pi * self.well_radius ** 2


@dataclass(frozen=True)
class MediumPair:
    n_ambient: float = 1.0
    n_fluid: float = 1.333

    def __post_init__(self):
        if not (self.n_ambient > 0 and self.n_fluid > 0):
            raise ValueError("refractive indices must be positive")


@dataclass(frozen=True)
class TransferConstants:
    c0: float
    c1: float
    c2: float


@dataclass(frozen=True)
class RayPath:
    x0: float
    x1: float
    xf: float
    apparent_distance: float


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera looking straight up the well axis."""

    focal_length: float = 3.0
    pixel_pitch: float = 0.0014
    width: int = 640
    height: int = 480
    principal_point: tuple[float, float] | None = None

    def __post_init__(self):
        if not (self.focal_length > 0 and self.pixel_pitch > 0):
            raise ValueError("focal_length and pixel_pitch must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.principal_point is None:
            # pixel centres sit on integer coordinates
            object.__setattr__(self, "principal_point",
                               ((self.width - 1) / 2.0, (self.height - 1) / 2.0))
        cx, cy = self.principal_point
        if not (0 <= cx <= self.width - 1 and 0 <= cy <= self.height - 1):
            raise ValueError("principal_point must lie inside the image")


def snell_refract(theta_in: float, n_in: float, n_out: float) -> float:
    """Refracted angle for a ray crossing from index ``n_in`` into ``n_out``.

    Raises:
        TotalInternalReflection: no refracted ray exists.
    """
    if not (0.0 <= theta_in < math.pi / 2):
        raise InvalidAngle(f"incidence angle {theta_in!r} outside [0, pi/2)")
    if n_in <= 0 or n_out <= 0:
        raise ValueError("refractive indices must be positive")
    s = n_in / n_out * math.sin(theta_in)
    if s > 1.0:
        raise TotalInternalReflection(
            f"sin(theta_out) = {s:.6f} > 1 for n_in={n_in}, n_out={n_out}")
    return math.asin(s)


def transfer_constants(geom: WellGeometry, media: MediumPair,
                       theta1: float) -> TransferConstants:
    if not (0.0 < theta1 < math.pi / 2):
        raise InvalidAngle(f"theta1 must be in (0, pi/2), got {theta1!r}")
    theta2 = snell_refract(theta1, media.n_ambient, media.n_fluid)
    return TransferConstants(
        c0=geom.source_height_h - geom.bottom_offset_h1,
        c1=math.tan(theta1),
        c2=math.tan(theta2),
    )


def volume_to_level(v: float, geom: WellGeometry) -> float:
    """Fluid depth in mm for ``v`` ml in a cylindrical well."""
    if not (0.0 <= v <= geom.capacity):
        raise OutOfRange(f"volume {v} ml outside [0, {geom.capacity}]")
    return 1000.0 * v / geom.cross_section


def level_to_volume(level: float, geom: WellGeometry) -> float:
    if not (0.0 <= level <= geom.well_depth):
        raise OutOfRange(f"level {level} mm outside [0, {geom.well_depth}]")
    return level * geom.cross_section / 1000.0


def _check_level(level, geom):
    if not (0.0 <= level <= geom.well_depth):
        raise OutOfRange(f"level {level} mm outside [0, {geom.well_depth}]")


def apparent_distance_exact(geom: WellGeometry, media: MediumPair,
                            level: float, theta1: float) -> RayPath:
    """Trace one ray at angle ``theta1`` and return its lateral offsets.

    The apparent distance is where the unrefracted continuation of the
    final ray segment meets the axis, ``xf / tan(theta1)``.
    """
    _check_level(level, geom)
    k = transfer_constants(geom, media, theta1)
    x0 = (k.c0 - level) * k.c1
    x1 = x0 + level * k.c2
    xf = x1 + geom.bottom_offset_h1 * k.c1
    return RayPath(x0=x0, x1=x1, xf=xf, apparent_distance=xf / k.c1)


def apparent_distance_paraxial(geom: WellGeometry, media: MediumPair,
                               level: float) -> float:
    """Small-angle apparent distance, ``h - L (1 - n_ambient / n_fluid)``."""
    _check_level(level, geom)
    return geom.source_height_h - level * (1.0 - media.n_ambient / media.n_fluid)


def expected_spot_radius(apparent_distance: float, camera: CameraModel,
                         source_radius: float) -> float:
    """Image radius in pixels of a disk source at ``apparent_distance``."""
    if source_radius <= 0:
        raise ValueError("source_radius must be positive")
    if apparent_distance <= camera.focal_length:
        raise DegenerateProjection(
            f"apparent distance {apparent_distance} mm is inside the focal "
            f"length {camera.focal_length} mm")
    return source_radius * camera.focal_length / apparent_distance / camera.pixel_pitch
