"""Forward model and synthetic frame renderer.

The analytic response is built from the paraxial optics model, linearized
over the stable-meniscus range, then bent piecewise to mimic the developing
meniscus (region A), meniscus inversion (region C) and overflow (region D).
Rendered frames are the oracle input for the vision pipeline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .optics import (
    CameraModel,
    MediumPair,
    WellGeometry,
    apparent_distance_exact,
    apparent_distance_paraxial,
    expected_spot_radius,
    volume_to_level,
)
from .vision import Frame, ellipse_perimeter

__all__ = [
    "CameraModel",
    "MeniscusProfile",
    "SceneConfig",
    "Region",
    "SweepSample",
    "region_of",
    "paraxial_perimeter",
    "stable_slope",
    "effective_perimeter",
    "trace_rim_radius",
    "render_frame",
    "sweep",
]

BACKGROUND_LEVEL = 12
SPOT_LEVEL = 235
DROPLET_LEVEL = 200
SUPERSAMPLE = 8


class Region(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"

    def __lt__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return self.value < other.value


@dataclass(frozen=True)
class MeniscusProfile:
    v_film: float = 0.5
    v_invert: float = 2.2
    v_overflow: float = 2.6
    developing_slope_factor: float = 0.6
    inversion_gain: float = 1.03

    def __post_init__(self):
        if not 0 < self.v_film < self.v_invert < self.v_overflow:
            raise ValueError("need 0 < v_film < v_invert < v_overflow")
        if not 0 < self.developing_slope_factor < 1:
            raise ValueError("developing_slope_factor must be in (0, 1)")
        if not self.inversion_gain > 1:
            raise ValueError("inversion_gain must be > 1")


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to render a frame deterministically.

    ``dry_well`` renders scattered droplets instead of a spot below
    ``meniscus.v_film``; a pre-wetted well (False) shows a coherent spot at
    every volume. ``astigmatism`` is the minor/major axis ratio of the spot.
    """

    geometry: WellGeometry = field(default_factory=WellGeometry)
    media: MediumPair = field(default_factory=MediumPair)
    camera: CameraModel = field(default_factory=CameraModel)
    source_radius: float = 2.5
    meniscus: MeniscusProfile = field(default_factory=MeniscusProfile)
    noise_sigma: float = 0.0
    occlusion_fraction: float = 0.0
    seed: int = 0
    dry_well: bool = True
    astigmatism: float = 1.0

    def __post_init__(self):
        if self.source_radius <= 0:
            raise ValueError("source_radius must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.occlusion_fraction < 1:
            raise ValueError("occlusion_fraction must be in [0, 1)")
        if not 0 < self.astigmatism <= 1:
            raise ValueError("astigmatism must be in (0, 1]")
        if self.meniscus.v_invert > self.geometry.capacity:
            raise ValueError("meniscus inversion must start below well capacity")
        if self.meniscus.v_overflow > 1.1 * self.geometry.capacity:
            raise ValueError("v_overflow exceeds well capacity by more than 10%")


@dataclass(frozen=True)
class SweepSample:
    volume: float
    frame: Frame
    expected_perimeter: float


def region_of(v: float, profile: MeniscusProfile) -> Region:
    if v < profile.v_film:
        return Region.A
    if v < profile.v_invert:
        return Region.B
    if v < profile.v_overflow:
        return Region.C
    return Region.D


def paraxial_perimeter(scene: SceneConfig, v: float) -> float:
    """Unmodified 2*pi*r of the spot for a flat fluid surface."""
    level = volume_to_level(v, scene.geometry)
    dist = apparent_distance_paraxial(scene.geometry, scene.media, level)
    return 2 * math.pi * expected_spot_radius(dist, scene.camera, scene.source_radius)


def _mid_stable(scene):
    m = scene.meniscus
    return 0.5 * (m.v_film + m.v_invert)


def stable_slope(scene: SceneConfig) -> float:
    """d(2*pi*r)/dV of the paraxial model at the middle of region B, px/ml."""
    geom, media = scene.geometry, scene.media
    level = volume_to_level(_mid_stable(scene), geom)
    dist = apparent_distance_paraxial(geom, media, level)
    r = expected_spot_radius(dist, scene.camera, scene.source_radius)
    # r ~ 1/I, I = h - L(1 - n1/n2), L = 1000 V / (pi R^2)
    return 2 * math.pi * (r / dist) * (1 - media.n_ambient / media.n_fluid) \
        * 1000.0 / geom.cross_section


def effective_perimeter(scene: SceneConfig, v: float) -> float:
    """Noise-free spot perimeter in pixels at volume ``v`` ml.

    Piecewise linear and continuous. Region B follows the tangent of the
    paraxial response at mid-region. Region A grows from the dry baseline at
    ``developing_slope_factor`` times that slope. Region C adds a
    magnification of the inversion-onset perimeter that ramps from 1 to
    ``inversion_gain`` across the region. Region D holds the overflow value.
    """
    if v < 0:
        raise ValueError("volume must be non-negative")
    m = scene.meniscus
    slope = stable_slope(scene)
    v_mid = _mid_stable(scene)
    p_mid = paraxial_perimeter(scene, v_mid)
    dry = p_mid - slope * v_mid
    p_film = dry + m.developing_slope_factor * slope * m.v_film
    p_invert = p_film + slope * (m.v_invert - m.v_film)

    def stable(x):
        return p_film + slope * (x - m.v_film)

    def inverting(x):
        ramp = (m.inversion_gain - 1) * (x - m.v_invert) / (m.v_overflow - m.v_invert)
        return stable(x) + ramp * p_invert

    region = region_of(v, m)
    if region is Region.A:
        return dry + m.developing_slope_factor * slope * v
    if region is Region.B:
        return stable(v)
    if region is Region.C:
        return inverting(v)
    return inverting(m.v_overflow)


def trace_rim_radius(scene: SceneConfig, v: float) -> float:
    """Image radius in pixels of the source rim found by exact ray tracing.

    Solves for the camera ray angle whose traced lateral offset at the LED
    plane equals the source radius, then projects that angle through the
    pinhole.
    """
    geom, media, cam = scene.geometry, scene.media, scene.camera
    level = volume_to_level(v, geom)

    def miss(theta):
        return apparent_distance_exact(geom, media, level, theta).xf - scene.source_radius

    hi = math.atan(scene.source_radius / (geom.bottom_offset_h1 * 0.5))
    hi = min(hi, math.asin(min(1.0, media.n_fluid / media.n_ambient)) * 0.999, 1.5)
    theta = brentq(miss, 1e-9, hi, xtol=1e-15, rtol=1e-15)
    return cam.focal_length * math.tan(theta) / cam.pixel_pitch


def _spot_axes(scene, perimeter):
    a = perimeter / ellipse_perimeter(1.0, scene.astigmatism)
    return a, a * scene.astigmatism


def _ellipse_coverage(height, width, cx, cy, a, b, ss=SUPERSAMPLE):
    """Fraction of each pixel covered by an axis-aligned ellipse."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    q = np.sqrt(((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2)
    cover = (q <= 1.0).astype(np.float64)
    band = np.abs(q - 1.0) * b < 1.5
    by, bx = np.nonzero(band)
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    sx = bx[:, None] + ox.ravel()[None, :]
    sy = by[:, None] + oy.ravel()[None, :]
    hits = ((sx - cx) / a) ** 2 + ((sy - cy) / b) ** 2 <= 1.0
    cover[by, bx] = hits.mean(axis=1)
    return cover


def _draw_disks(img, centers, radii, level):
    h, w = img.shape
    for (x, y), r in zip(centers, radii):
        x0, x1 = max(int(math.floor(x - r)), 0), min(int(math.ceil(x + r)) + 1, w)
        y0, y1 = max(int(math.floor(y - r)), 0), min(int(math.ceil(y + r)) + 1, h)
        if x0 >= x1 or y0 >= y1:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        img[y0:y1, x0:x1][(xx - x) ** 2 + (yy - y) ** 2 <= r * r] = level


def render_frame(scene: SceneConfig, v: float, index: int = 0) -> Frame:
    """Render the camera view at volume ``v``.

    ``index`` is mixed into the seed so frames of a sweep get independent
    noise and occluders while remaining reproducible.
    """
    if v < 0:
        raise ValueError("volume must be non-negative")
    cam = scene.camera
    rng = np.random.default_rng([scene.seed, index])
    img = np.full((cam.height, cam.width), float(BACKGROUND_LEVEL))
    cx, cy = cam.principal_point
    perimeter = effective_perimeter(scene, v)
    a, b = _spot_axes(scene, perimeter)

    if scene.dry_well and v < scene.meniscus.v_film:
        # beaded droplets: small bright specks, no coherent spot
        n = 8 + int(40 * v / scene.meniscus.v_film)
        rho = a * np.sqrt(rng.uniform(0, 1, n)) * 1.2
        phi = rng.uniform(0, 2 * math.pi, n)
        centers = np.column_stack([cx + rho * np.cos(phi), cy + rho * np.sin(phi)])
        _draw_disks(img, centers, rng.uniform(1.0, 2.2, n), DROPLET_LEVEL)
    else:
        cover = _ellipse_coverage(cam.height, cam.width, cx, cy, a, b)
        img += cover * (SPOT_LEVEL - BACKGROUND_LEVEL)
        if scene.occlusion_fraction > 0:
            n = 4
            r_blob = math.sqrt(scene.occlusion_fraction * a * b / n)
            rho = np.sqrt(rng.uniform(0, 1, n))
            phi = rng.uniform(0, 2 * math.pi, n)
            centers = np.column_stack([cx + a * rho * np.cos(phi),
                                       cy + b * rho * np.sin(phi)])
            _draw_disks(img, centers, [r_blob] * n, BACKGROUND_LEVEL)

    if scene.noise_sigma > 0:
        img += rng.normal(0.0, scene.noise_sigma, img.shape)
    return Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def sweep(scene: SceneConfig, v_start: float, v_end: float,
          steps: int) -> list[SweepSample]:
    if not v_start < v_end:
        raise ValueError("v_start must be below v_end")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    volumes = np.linspace(v_start, v_end, steps)
    return [SweepSample(float(v), render_frame(scene, float(v), i),
                        effective_perimeter(scene, float(v)))
            for i, v in enumerate(volumes)]
