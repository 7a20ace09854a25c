"""Frame-to-measurement pipeline.

threshold -> outer contours -> central contour -> ellipse fit -> perimeter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    DegenerateConic,
    DegenerateImage,
    InsufficientPoints,
    NoContour,
)

__all__ = [
    "Frame",
    "Contour",
    "EllipseFit",
    "VisionParams",
    "otsu_threshold",
    "binarize",
    "extract_contours",
    "central_contour",
    "fit_ellipse",
    "ellipse_perimeter",
    "measure_frame",
]


@dataclass(frozen=True, eq=False)
class Frame:
    """An 8-bit grayscale image, ``pixels[row, col]``."""

    pixels: np.ndarray
    timestamp: float | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_timestamp(self, timestamp):
        return Frame(self.pixels, timestamp)


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed outer boundary; ``points`` is an (n, 2) array of (x, y)."""

    points: np.ndarray
    area: float

    @property
    def centroid(self) -> tuple[float, float]:
        return _polygon_centroid(self.points)


@dataclass(frozen=True)
class EllipseFit:
    cx: float
    cy: float
    a: float
    b: float
    rotation: float
    perimeter: float

    @property
    def center(self):
        return (self.cx, self.cy)


@dataclass(frozen=True)
class VisionParams:
    """Tuning of the detection pipeline.

    ``threshold`` of None selects Otsu's criterion. Contours whose centroid
    distances to the image centre differ by less than ``center_weight``
    pixels count as tied, and the larger one wins. Boundary points sitting
    deeper than ``concavity_tolerance`` pixels inside the contour's convex
    hull (notches cut by occluders) are dropped before fitting; None keeps
    every point. With ``subpixel`` each boundary pixel is replaced by the
    interpolated threshold crossings towards its background 4-neighbours.
    """

    threshold: int | None = None
    min_contour_area: float = 100.0
    center_weight: float = 1.0
    concavity_tolerance: float | None = 1.0
    subpixel: bool = True

    def __post_init__(self):
        if self.threshold is not None and not 0 <= self.threshold <= 255:
            raise ValueError("threshold must be in 0..255")
        if self.min_contour_area < 5:
            raise ValueError("min_contour_area must be >= 5")
        if self.center_weight < 0:
            raise ValueError("center_weight must be non-negative")


def otsu_threshold(pixels: np.ndarray) -> int:
    """Smallest foreground level maximizing between-class variance."""
    hist = np.bincount(np.asarray(pixels, dtype=np.uint8).ravel(), minlength=256)
    hist = hist.astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateImage("all pixels share one intensity")
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    m0 = np.cumsum(hist * levels)
    total, mtotal = w0[-1], m0[-1]
    w1 = total - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mtotal * w0 - m0 * total) ** 2 / (w0 * w1)
    between[~np.isfinite(between)] = -1.0
    # classes are {<= t} and {> t}
    return int(np.argmax(between)) + 1


def _threshold_level(frame, params):
    if params.threshold is None:
        return otsu_threshold(frame.pixels)
    return params.threshold


def binarize(frame: Frame, params: VisionParams = VisionParams()) -> np.ndarray:
    return frame.pixels >= _threshold_level(frame, params)


# clockwise in image coordinates (y down), starting west
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


def _trace_outer(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbour trace of the outer boundary through ``start``.

    ``start`` must be the first foreground pixel in raster order so that its
    west neighbour is background. ``mask`` must carry a one-pixel background
    border.
    """

    def step(p, back):
        px, py = p
        for k in range(1, 9):
            i = (back + k) % 8
            dx, dy = _DIRS[i]
            if mask[py + dy, px + dx]:
                q = (px + dx, py + dy)
                bx, by = _DIRS[(i - 1) % 8]
                prev = (px + bx, py + by)
                return q, _DIR_INDEX[(prev[0] - q[0], prev[1] - q[1])]
        return None, back

    second, back = step(start, 0)
    if second is None:
        return [start]
    points = [start]
    p = second
    while True:
        points.append(p)
        q, back = step(p, back)
        if p == start and q == second:
            points.pop()
            return points
        p = q


def _shoelace(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _polygon_centroid(points: np.ndarray) -> tuple[float, float]:
    x, y = points[:, 0].astype(float), points[:, 1].astype(float)
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-12:
        return float(x.mean()), float(y.mean())
    return (float(((x + xn) * cross).sum() / (6 * a)),
            float(((y + yn) * cross).sum() / (6 * a)))


def extract_contours(mask: np.ndarray) -> list[Contour]:
    """One outer boundary per 8-connected foreground component."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    contours = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        sub = np.pad(labels[sl] == lab, 1)
        rows, cols = np.nonzero(sub)
        start = (int(cols[0]), int(rows[0]))
        pts = np.asarray(_trace_outer(sub, start), dtype=np.int64)
        pts[:, 0] += sl[1].start - 1
        pts[:, 1] += sl[0].start - 1
        contours.append(Contour(points=pts, area=abs(_shoelace(pts))))
    return contours


def central_contour(contours: list[Contour], frame_dims: tuple[int, int],
                    params: VisionParams = VisionParams()) -> Contour:
    """Pick the qualifying contour closest to the image centre.

    ``frame_dims`` is (width, height).
    """
    width, height = frame_dims
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    candidates = [c for c in contours if c.area >= params.min_contour_area]
    if not candidates:
        raise NoContour(f"no contour with area >= {params.min_contour_area} px^2")
    dist = [math.hypot(c.centroid[0] - cx, c.centroid[1] - cy) for c in candidates]
    best = min(dist)
    tied = [c for c, d in zip(candidates, dist) if d - best <= params.center_weight]
    return max(tied, key=lambda c: c.area)


def _drop_concavities(points: np.ndarray, tol: float) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return pts
    # facet equations satisfy n.p + off <= 0 inside the hull
    depth = -(pts @ hull.equations[:, :2].T + hull.equations[:, 2]).max(axis=1)
    keep = pts[depth <= tol]
    return keep if len(keep) >= 5 else pts


def _refine_cracks(pixels, mask, points, level):
    """Sub-pixel edge points between boundary pixels and background neighbours."""
    h, w = mask.shape
    pts = np.asarray(points, dtype=np.int64)
    img = pixels.astype(np.float64)
    # a pixel is foreground at >= level, so the decision boundary is level - 0.5
    edge = level - 0.5
    out = []
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        qx, qy = pts[:, 0] + dx, pts[:, 1] + dy
        ok = (qx >= 0) & (qx < w) & (qy >= 0) & (qy < h)
        p_ok, qx, qy = pts[ok], qx[ok], qy[ok]
        bg = ~mask[qy, qx]
        p_ok, qx, qy = p_ok[bg], qx[bg], qy[bg]
        ip = img[p_ok[:, 1], p_ok[:, 0]]
        iq = img[qy, qx]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ip - edge) / (ip - iq)
        t = np.clip(np.nan_to_num(t, nan=0.5), 0.0, 1.0)
        out.append(np.column_stack([p_ok[:, 0] + t * dx, p_ok[:, 1] + t * dy]))
    refined = np.unique(np.concatenate(out), axis=0)
    return refined if len(refined) >= 5 else pts.astype(np.float64)


def _conic_to_params(coef):
    A, B, C, D, E, F = coef
    disc = B * B - 4 * A * C
    if not disc < 0:
        raise DegenerateConic("fitted conic is not an ellipse")
    x0 = (2 * C * D - B * E) / disc
    y0 = (2 * A * E - B * D) / disc
    f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F
    evals, evecs = np.linalg.eigh(np.array([[A, B / 2], [B / 2, C]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = -f0 / evals
    if not np.all(np.isfinite(sq)) or np.any(sq <= 0):
        raise DegenerateConic("fitted conic has no real ellipse")
    axes = np.sqrt(sq)
    i = int(np.argmax(axes))
    vx, vy = evecs[:, i]
    rotation = math.atan2(vy, vx) % math.pi
    if rotation >= math.pi:
        rotation = 0.0
    return float(x0), float(y0), float(axes[i]), float(axes[1 - i]), rotation


def fit_ellipse(points) -> EllipseFit:
    """Direct least-squares ellipse fit with the 4AC - B^2 = 1 constraint.

    Uses the block decomposition of Halir and Flusser on isotropically
    normalized coordinates. ``points`` is a Contour or an (n, 2) array.
    """
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    if len(np.unique(pts, axis=0)) < 5:
        raise InsufficientPoints("an ellipse needs at least 5 distinct points")

    mean = pts.mean(axis=0)
    centred = pts - mean
    spread = np.sqrt((centred ** 2).sum(axis=1)).mean()
    if spread == 0:
        raise DegenerateConic("all points coincide")
    scale = math.sqrt(2) / spread
    x, y = centred[:, 0] * scale, centred[:, 1] * scale

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1, s2, s3 = d1.T @ d1, d1.T @ d2, d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        raise DegenerateConic("points are collinear") from None
    if np.linalg.cond(s3) > 1e12:
        raise DegenerateConic("points are collinear")
    m = s1 + s2 @ t
    m = np.array([m[2] / 2, -m[1], m[0] / 2])
    evals, evecs = np.linalg.eig(m)
    evecs = np.real(evecs)
    cond = 4 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.nonzero(cond > 0)[0]
    if len(ok) == 0:
        raise DegenerateConic("no elliptical solution")
    if len(ok) > 1:
        ok = ok[np.argmin(np.abs(np.real(evals[ok])))]
    a1 = evecs[:, int(np.atleast_1d(ok)[0])]
    coef = np.concatenate([a1, t @ a1])

    x0, y0, a, b, rot = _conic_to_params(coef)
    a /= scale
    b /= scale
    return EllipseFit(cx=float(x0 / scale + mean[0]), cy=float(y0 / scale + mean[1]),
                      a=a, b=b, rotation=rot, perimeter=ellipse_perimeter(a, b))


def ellipse_perimeter(a: float, b: float) -> float:
    """Ramanujan's second approximation to the ellipse circumference."""
    if a < b:
        a, b = b, a
    if b < 0 or a <= 0:
        raise ValueError("semi-axes must satisfy a >= b >= 0, a > 0")
    t = ((a - b) / (a + b)) ** 2
    return math.pi * (a + b) * (1 + 3 * t / (10 + math.sqrt(4 - 3 * t)))


def measure_frame(frame: Frame, params: VisionParams = VisionParams()) -> EllipseFit:
    """Fit the ellipse of the central bright spot.

    Raises:
        NoContour: nothing large enough near the centre, or a uniform frame.
    """
    try:
        level = _threshold_level(frame, params)
    except DegenerateImage as exc:
        raise NoContour(f"uniform frame: {exc}") from exc
    mask = frame.pixels >= level
    contour = central_contour(extract_contours(mask), (frame.width, frame.height), params)
    pts = contour.points
    if params.concavity_tolerance is not None:
        pts = _drop_concavities(pts, params.concavity_tolerance)
    if params.subpixel:
        pts = _refine_cracks(frame.pixels, mask, np.rint(pts).astype(np.int64), level)
    return fit_ellipse(pts)
