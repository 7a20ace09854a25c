"""Perimeter <-> volume calibration curves and their error analysis."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_triangular

from .errors import (
    DegeneratePoints,
    InsufficientPoints,
    ModelFormatError,
    NotMonotone,
    OutOfRange,
    RankDeficient,
    RegionNotCovered,
)
from .simulate import MeniscusProfile, Region, region_of

__all__ = [
    "CalibrationPoint",
    "CalibrationModel",
    "Evaluation",
    "ErrorReport",
    "fit_linear_2pt",
    "fit_poly_ls",
    "pick_region_points",
    "select_calibration_points",
    "evaluate",
    "invert",
    "estimate_volume",
    "residual_sum_of_squares",
    "error_report",
]

V2P = "v2p"
P2V = "p2v"
KINDS = ("linear_2pt", "poly_ls")
SCHEMA_FIELDS = ("version", "well_id", "kind", "order", "direction", "coefficients",
                 "valid_range", "created_utc", "points_used")


@dataclass(frozen=True)
class CalibrationPoint:
    volume: float
    perimeter: float
    region: Region | None = None

    def __post_init__(self):
        if not self.volume >= 0:
            raise ValueError(f"volume must be >= 0, got {self.volume}")
        if not self.perimeter > 0:
            raise ValueError(f"perimeter must be > 0, got {self.perimeter}")

    def abscissa(self, direction):
        return self.volume if direction == V2P else self.perimeter

    def ordinate(self, direction):
        return self.perimeter if direction == V2P else self.volume


def _utc_now():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class CalibrationModel:
    """Polynomial in ascending powers of the independent variable.

    ``direction`` is ``"v2p"`` (volume in ml -> perimeter in px) or
    ``"p2v"`` (perimeter -> volume).
    """

    kind: str
    order: int
    direction: str
    coefficients: tuple[float, ...]
    valid_range: tuple[float, float]
    well_id: str = ""
    created_utc: str = field(default_factory=_utc_now)
    points_used: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.direction not in (V2P, P2V):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.order < 1 or len(self.coefficients) != self.order + 1:
            raise ValueError("coefficients must have order + 1 entries")
        lo, hi = self.valid_range
        if not lo < hi:
            raise ValueError("valid_range must be increasing")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "valid_range", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "well_id": self.well_id,
            "kind": self.kind,
            "order": self.order,
            "direction": self.direction,
            "coefficients": list(self.coefficients),
            "valid_range": list(self.valid_range),
            "created_utc": self.created_utc,
            "points_used": self.points_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationModel":
        if not isinstance(doc, dict):
            raise ModelFormatError("model document must be a JSON object")
        keys = tuple(doc)
        if set(keys) != set(SCHEMA_FIELDS):
            extra = sorted(set(keys) - set(SCHEMA_FIELDS))
            missing = sorted(set(SCHEMA_FIELDS) - set(keys))
            raise ModelFormatError(f"bad model fields: unknown {extra}, missing {missing}")
        if doc["version"] != 1:
            raise ModelFormatError(f"unsupported model version {doc['version']!r}")
        try:
            return cls(kind=doc["kind"], order=int(doc["order"]),
                       direction=doc["direction"],
                       coefficients=tuple(doc["coefficients"]),
                       valid_range=tuple(doc["valid_range"]),
                       well_id=str(doc["well_id"]), created_utc=str(doc["created_utc"]),
                       points_used=int(doc["points_used"]))
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "CalibrationModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


class Evaluation(NamedTuple):
    value: float
    extrapolated: bool


@dataclass
class ErrorReport:
    volumes: list[float]
    errors_ul: list[float]
    regions: list[Region | None]
    extrapolated: list[bool]
    mean_abs_error: float
    max_abs_error: float
    rss_ml2: float
    per_region: dict[Region, tuple[int, float, float]]


def fit_linear_2pt(p1: CalibrationPoint, p2: CalibrationPoint,
                   direction: str = V2P, **meta) -> CalibrationModel:
    x1, x2 = p1.abscissa(direction), p2.abscissa(direction)
    if x1 == x2:
        raise DegeneratePoints("calibration points share the same abscissa")
    y1, y2 = p1.ordinate(direction), p2.ordinate(direction)
    slope = (y2 - y1) / (x2 - x1)
    return CalibrationModel(kind="linear_2pt", order=1, direction=direction,
                            coefficients=(y1 - slope * x1, slope),
                            valid_range=(min(x1, x2), max(x1, x2)),
                            points_used=2, **meta)


def fit_poly_ls(points: Sequence[CalibrationPoint], order: int,
                direction: str = P2V, **meta) -> CalibrationModel:
    """Least-squares polynomial of the given order.

    The abscissa is mapped to [-1, 1] and the scaled Vandermonde matrix is
    solved through a QR factorization; the result is re-expanded in raw
    powers for storage.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if len(points) < order + 1:
        raise InsufficientPoints(f"order {order} needs at least {order + 1} points, "
                                 f"got {len(points)}")
    x = np.array([p.abscissa(direction) for p in points], dtype=np.float64)
    y = np.array([p.ordinate(direction) for p in points], dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        raise RankDeficient("all abscissae are equal")
    if len(np.unique(x)) < order + 1:
        raise RankDeficient(f"{len(np.unique(x))} distinct abscissae cannot "
                            f"determine order {order}")
    centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    t = (x - centre) / half
    vander = np.polynomial.polynomial.polyvander(t, order)
    q, r = np.linalg.qr(vander)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * diag.max():
        raise RankDeficient("design matrix is numerically rank deficient")
    coef_t = solve_triangular(r, q.T @ y)
    coef_x = Polynomial(coef_t)(Polynomial([-centre / half, 1.0 / half])).coef
    coef_x = np.pad(coef_x, (0, order + 1 - len(coef_x)))
    return CalibrationModel(kind="poly_ls", order=order, direction=direction,
                            coefficients=tuple(coef_x), valid_range=(lo, hi),
                            points_used=len(points), **meta)


def _horner(coefficients, x):
    acc = 0.0
    for c in reversed(coefficients):
        acc = acc * x + c
    return acc


def evaluate(model: CalibrationModel, x: float) -> Evaluation:
    lo, hi = model.valid_range
    return Evaluation(_horner(model.coefficients, x), not lo <= x <= hi)


def _check_monotone(model):
    lo, hi = model.valid_range
    deriv = Polynomial(model.coefficients).deriv()
    slopes = deriv(np.linspace(lo, hi, 64))
    if not (np.all(slopes > 0) or np.all(slopes < 0)):
        raise NotMonotone("model is not monotone over its valid range")
    return slopes[0] > 0


def invert(model: CalibrationModel, y: float) -> float:
    """Find x in the valid range with f(x) = y by bisection."""
    increasing = _check_monotone(model)
    lo, hi = model.valid_range
    f_lo, f_hi = _horner(model.coefficients, lo), _horner(model.coefficients, hi)
    if not min(f_lo, f_hi) <= y <= max(f_lo, f_hi):
        raise OutOfRange(f"{y} outside model image [{min(f_lo, f_hi)}, {max(f_lo, f_hi)}]")
    tol = 1e-9 * max(abs(y), 1e-300)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = _horner(model.coefficients, mid)
        if abs(fm - y) < tol or mid in (lo, hi):
            return mid
        if (fm < y) == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def estimate_volume(model: CalibrationModel, perimeter: float) -> Evaluation:
    """Volume in ml for a measured perimeter, with an out-of-range flag."""
    if model.direction == P2V:
        return evaluate(model, perimeter)
    _check_monotone(model)
    lo, hi = model.valid_range
    f_lo, f_hi = _horner(model.coefficients, lo), _horner(model.coefficients, hi)
    p_lo, p_hi = min(f_lo, f_hi), max(f_lo, f_hi)
    if p_lo <= perimeter <= p_hi:
        return Evaluation(invert(model, perimeter), False)
    # outside the calibrated image: continue the line through the nearest end
    end = lo if (perimeter < p_lo) == (f_lo < f_hi) else hi
    slope = Polynomial(model.coefficients).deriv()(end)
    if slope == 0:
        raise NotMonotone("flat model at range end")
    return Evaluation(end + (perimeter - _horner(model.coefficients, end)) / slope, True)


def residual_sum_of_squares(model: CalibrationModel,
                            points: Sequence[CalibrationPoint]) -> float:
    """Sum of squared residuals in the model's output units."""
    return math.fsum((_horner(model.coefficients, p.abscissa(model.direction))
                      - p.ordinate(model.direction)) ** 2 for p in points)


def pick_region_points(sweep: Sequence[tuple[float, float]], profile: MeniscusProfile,
                       region: Region) -> list[CalibrationPoint]:
    """The sweep points of one region nearest 25% and 75% through its span.

    Repeated volumes are merged by averaging their perimeters.
    """
    rows = [(float(v), float(p)) for v, p in sweep if region_of(v, profile) is region]
    vols = sorted({v for v, _ in rows})
    if len(vols) < 2:
        raise RegionNotCovered(f"sweep has {len(vols)} distinct volume(s) in region "
                               f"{region.value}, need 2")
    lo, hi = vols[0], vols[-1]
    picks = []
    for frac in (0.25, 0.75):
        target = lo + frac * (hi - lo)
        remaining = [v for v in vols if v not in picks]
        picks.append(min(remaining, key=lambda v: (abs(v - target), v)))
    return [CalibrationPoint(v, float(np.mean([p for vv, p in rows if vv == v])), region)
            for v in sorted(picks)]


def select_calibration_points(sweep: Sequence[tuple[float, float]],
                              profile: MeniscusProfile) -> list[CalibrationPoint]:
    """Two points from each of regions A, B and C; overflow is left out."""
    return [pt for region in (Region.A, Region.B, Region.C)
            for pt in pick_region_points(sweep, profile, region)]


def error_report(model: CalibrationModel, truth: Sequence[tuple[float, float]],
                 profile: MeniscusProfile | None = None) -> ErrorReport:
    """Volume errors (estimate - truth) in microlitres over ``truth`` pairs."""
    volumes, errors, regions, flags = [], [], [], []
    for v, p in truth:
        est = estimate_volume(model, p)
        volumes.append(float(v))
        errors.append((est.value - v) * 1000.0)
        flags.append(est.extrapolated)
        regions.append(region_of(v, profile) if profile is not None else None)
    if not errors:
        raise ValueError("no truth points")
    abs_err = [abs(e) for e in errors]
    per_region = {}
    for region in Region:
        sel = [e for e, r in zip(abs_err, regions) if r is region]
        if sel:
            per_region[region] = (len(sel), math.fsum(sel) / len(sel), max(sel))
    return ErrorReport(
        volumes=volumes, errors_ul=errors, regions=regions, extrapolated=flags,
        mean_abs_error=math.fsum(abs_err) / len(abs_err), max_abs_error=max(abs_err),
        rss_ml2=math.fsum((e / 1000.0) ** 2 for e in errors), per_region=per_region,
    )
