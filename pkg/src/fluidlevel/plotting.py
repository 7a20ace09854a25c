"""Static figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .calibrate import P2V, estimate_volume, evaluate  # noqa: E402
from .simulate import Region  # noqa: E402

REGION_COLORS = {Region.A: "#f2d7d5", Region.B: "#d5f5e3", Region.C: "#d6eaf8",
                 Region.D: "#eeeeee"}


def _shade_regions(ax, profile, v_max):
    if profile is None:
        return
    edges = [0.0, profile.v_film, profile.v_invert, profile.v_overflow, max(v_max, profile.v_overflow)]
    for region, lo, hi in zip(Region, edges[:-1], edges[1:]):
        if hi > lo:
            ax.axvspan(lo, hi, color=REGION_COLORS[region], alpha=0.6, lw=0)
            ax.text(0.5 * (lo + hi), 0.98, region.value, transform=ax.get_xaxis_transform(),
                    ha="center", va="top", fontsize=10)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_response(path, volumes, expected=None, measured=None, profile=None):
    """Spot perimeter against fluid volume with meniscus regions shaded."""
    volumes = np.asarray(volumes, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    _shade_regions(ax, profile, volumes.max() if len(volumes) else 0)
    if expected is not None:
        ax.plot(volumes, expected, "-", color="k", lw=1.2, label="model")
    if measured is not None:
        m = np.asarray(measured, dtype=float)
        ok = np.isfinite(m)
        ax.plot(volumes[ok], m[ok], "o", ms=4, color="tab:blue", label="measured")
    ax.set_xlabel("Fluid volume (ml)")
    ax.set_ylabel("Contour ellipse perimeter (px)")
    ax.legend(loc="upper left")
    _save(fig, path)


def plot_calibration_curves(path, points, models, labels=None, fit_points=None):
    """Calibration models drawn over the perimeter/volume data."""
    vols = np.array([p[0] for p in points], dtype=float)
    perims = np.array([p[1] for p in points], dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(perims, vols, ".", color="0.5", label="data")
    if fit_points:
        ax.plot([p.perimeter for p in fit_points], [p.volume for p in fit_points],
                "s", mfc="none", mec="k", ms=8, label="calibration points")
    grid = np.linspace(perims.min(), perims.max(), 300)
    labels = labels or [f"{m.kind} order {m.order}" for m in models]
    for model, label in zip(models, labels):
        if model.direction == P2V:
            est = [evaluate(model, x).value for x in grid]
        else:
            est = [estimate_volume(model, x).value for x in grid]
        ax.plot(grid, est, "-", lw=1.2, label=label)
    ax.set_xlabel("Contour ellipse perimeter (px)")
    ax.set_ylabel("Fluid volume (ml)")
    ax.set_ylim(vols.min() - 0.2, vols.max() + 0.2)
    ax.legend(loc="upper left", fontsize=8)
    _save(fig, path)


def plot_error_comparison(path, reports, profile=None):
    """Per-point volume error for each model, in microlitres."""
    fig, (ax, bx) = plt.subplots(1, 2, figsize=(11, 4.5), gridspec_kw={"width_ratios": [3, 2]})
    v_max = max(max(r.volumes) for r in reports.values())
    _shade_regions(ax, profile, v_max)
    for name, rep in reports.items():
        ax.plot(rep.volumes, rep.errors_ul, "o-", ms=3, lw=0.8, label=name)
    ax.axhline(0, color="k", lw=0.6)
    ax.set_xlabel("True volume (ml)")
    ax.set_ylabel("Estimate error (µl)")
    ax.legend(fontsize=8)

    names = list(reports)
    x = np.arange(len(names))
    bx.bar(x - 0.2, [reports[n].mean_abs_error for n in names], 0.4, label="mean |error|")
    bx.bar(x + 0.2, [reports[n].max_abs_error for n in names], 0.4, label="max |error|")
    bx.set_xticks(x)
    bx.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    bx.set_ylabel("µl")
    bx.legend(fontsize=8)
    _save(fig, path)
