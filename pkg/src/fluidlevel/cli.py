"""Command-line interface.

Subcommands: simulate, analyze, calibrate, measure, evaluate.

Exit codes: 0 success, 2 config/model error, 3 I/O error, 4 no data,
5 numeric/fit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .calibrate import (
    P2V,
    V2P,
    CalibrationModel,
    CalibrationPoint,
    error_report,
    estimate_volume,
    evaluate,
    fit_linear_2pt,
    fit_poly_ls,
    pick_region_points,
    residual_sum_of_squares,
    select_calibration_points,
)
from .config import ConfigError, RunConfig, load_config
from .errors import (
    DegeneratePoints,
    FluidLevelError,
    InsufficientPoints,
    NotMonotone,
    OutOfRange,
    RankDeficient,
    RegionNotCovered,
)
from .ingest import open_source, read_frame_file, write_pgm
from .simulate import Region, region_of, sweep
from .stabilize import Stabilizer
from .vision import measure_frame

log = logging.getLogger("fluidlevel")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NO_DATA = 4
EXIT_NUMERIC = 5

MANIFEST_HEADER = ["volume_ml", "frame_path", "expected_perimeter_px"]
ANALYZE_HEADER = ["timestamp", "cx", "cy", "a", "b", "rotation", "perimeter"]
POINTS_HEADER = ["volume_ml", "perimeter_px"]
REPORT_HEADER = ["model", "volume_ml", "perimeter_px", "estimated_ml", "error_ul",
                 "region", "extrapolated"]
SUMMARY_HEADER = ["model", "kind", "order", "n", "mae_ul", "max_abs_ul", "rss_ml2",
                  "mae_A_ul", "mae_B_ul", "mae_C_ul", "mae_D_ul"]
READING_FIELDS = ["well", "timestamp", "perimeter_px", "volume_ml", "region",
                  "stabilized", "sigma_px", "extrapolated"]


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _fmt(x):
    return "" if x is None else repr(float(x))


# ---------------------------------------------------------------- config

def _run_config(args) -> RunConfig:
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    scene = cfg.scene
    try:
        if args.seed is not None:
            scene = replace(scene, seed=args.seed)
        for flag, name in (("noise_sigma", "noise_sigma"), ("occlusion", "occlusion_fraction")):
            value = getattr(args, flag, None)
            if value is not None:
                scene = replace(scene, **{name: value})
        if getattr(args, "wet", False):
            scene = replace(scene, dry_well=False)
        stab = cfg.stabilizer
        if getattr(args, "window", None) is not None:
            stab = replace(stab, window=args.window)
        if getattr(args, "sigma_threshold", None) is not None:
            stab = replace(stab, sigma_threshold=args.sigma_threshold)
        if getattr(args, "absolute", False):
            stab = replace(stab, relative=False)
        vision = cfg.vision
        if getattr(args, "threshold", None) is not None:
            vision = replace(vision, threshold=args.threshold)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    cfg.scene, cfg.stabilizer, cfg.vision = scene, stab, vision
    return cfg


def _load_model(path) -> CalibrationModel:
    try:
        return CalibrationModel.from_json(Path(path).read_text())
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read model {path}: {exc}") from exc
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"bad model {path}: {exc}") from exc


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _load_dataset(path, cfg, use_expected=False):
    """(volume, perimeter) pairs from a points CSV or a sweep manifest."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CliError(EXIT_NO_DATA, f"{path} has no data rows")
    pairs = []
    try:
        if "frame_path" in rows[0]:
            for row in rows:
                v = float(row["volume_ml"])
                if use_expected:
                    pairs.append((v, float(row["expected_perimeter_px"])))
                    continue
                frame_path = path.parent / row["frame_path"]
                try:
                    fit = measure_frame(read_frame_file(frame_path), cfg.vision)
                except (FluidLevelError, OSError) as exc:
                    log.info("%s: %s", frame_path, exc)
                    continue
                pairs.append((v, fit.perimeter))
        else:
            for row in rows:
                pairs.append((float(row["volume_ml"]), float(row["perimeter_px"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"{path}: malformed row ({exc})") from exc
    return pairs, "frame_path" in rows[0]


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    if not (args.v_start < args.v_end and args.steps >= 2 and args.v_start >= 0):
        raise CliError(EXIT_CONFIG, "need 0 <= v_start < v_end and steps >= 2")
    out = Path(args.out_dir)
    samples = sweep(cfg.scene, args.v_start, args.v_end, args.steps)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, s in enumerate(samples):
            name = f"frame_{i:04d}.pgm"
            (out / name).write_bytes(write_pgm(s.frame))
            rows.append([_fmt(s.volume), name, _fmt(s.expected_perimeter)])
        with open(out / "manifest.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MANIFEST_HEADER)
            w.writerows(rows)
        if args.plot:
            from .plotting import plot_response
            plot_response(args.plot, [s.volume for s in samples],
                          expected=[s.expected_perimeter for s in samples],
                          profile=cfg.scene.meniscus)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write to {out}: {exc}") from exc
    log.info("wrote %d frames to %s", len(samples), out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _run_config(args)
    spec = args.source or cfg.source
    if not spec:
        raise CliError(EXIT_CONFIG, "no --source given")
    fh, close = _open_out(args.out)
    measured = 0
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANALYZE_HEADER)
        try:
            frames = open_source(spec, args.pattern, cfg.frame_interval, args.strict)
            for i, frame in enumerate(frames):
                try:
                    fit = measure_frame(frame, cfg.vision)
                except FluidLevelError as exc:
                    log.warning("frame %d: %s: %s", i, type(exc).__name__, exc)
                    continue
                w.writerow([_fmt(frame.timestamp), _fmt(fit.cx), _fmt(fit.cy), _fmt(fit.a),
                            _fmt(fit.b), _fmt(fit.rotation), _fmt(fit.perimeter)])
                measured += 1
        except ValueError as exc:
            if not isinstance(exc, FluidLevelError):
                raise CliError(EXIT_CONFIG, str(exc)) from exc
            log.error("source failed: %s", exc)
        except FluidLevelError as exc:
            log.error("source failed: %s", exc)
    finally:
        if close:
            fh.close()
    if measured == 0:
        raise CliError(EXIT_NO_DATA, "no frame could be measured")
    return EXIT_OK


def _linear_pair(pairs, profile):
    if len(pairs) == 2:
        return [CalibrationPoint(v, p) for v, p in pairs]
    return pick_region_points(pairs, profile, Region.B)


def cmd_calibrate(args) -> int:
    cfg = _run_config(args)
    profile = cfg.scene.meniscus
    pairs, is_manifest = _load_dataset(args.input, cfg, args.use_expected)
    direction = args.direction
    meta = {"well_id": args.well_id}
    try:
        if args.kind == "linear2":
            fit_points = _linear_pair(pairs, profile)
            model = fit_linear_2pt(fit_points[0], fit_points[1], direction, **meta)
        else:
            if is_manifest and not args.all_points:
                fit_points = select_calibration_points(pairs, profile)
            else:
                fit_points = [CalibrationPoint(v, p) for v, p in pairs]
            model = fit_poly_ls(fit_points, args.order, direction, **meta)
    except (InsufficientPoints, RankDeficient, DegeneratePoints, RegionNotCovered) as exc:
        raise CliError(EXIT_NUMERIC, f"fit failed: {exc}") from exc
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    try:
        Path(args.out).write_text(model.to_json() + "\n")
        if args.plot:
            from .plotting import plot_calibration_curves
            plot_calibration_curves(args.plot, pairs, [model], fit_points=fit_points)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from exc
    rss = residual_sum_of_squares(model, fit_points)
    unit = "ml^2" if direction == P2V else "px^2"
    print(f"kind={model.kind} order={model.order} direction={model.direction} "
          f"points={len(fit_points)} rss={rss:.6g} {unit} "
          f"range=[{model.valid_range[0]:.6g}, {model.valid_range[1]:.6g}]")
    return EXIT_OK


def _measure_stream(frames, model, cfg, well, emit, verbose):
    stab = Stabilizer(cfg.stabilizer)
    profile = cfg.scene.meniscus
    emitted = 0

    def record(ts, perimeter, stabilized, sigma):
        est = estimate_volume(model, perimeter)
        return {"well": well, "timestamp": ts, "perimeter_px": perimeter,
                "volume_ml": est.value, "region": region_of(max(est.value, 0.0), profile).value,
                "stabilized": stabilized, "sigma_px": sigma, "extrapolated": est.extrapolated}

    for frame in frames:
        try:
            fit = measure_frame(frame, cfg.vision)
        except FluidLevelError as exc:
            log.debug("well %s: frame skipped: %s", well, exc)
            continue
        reading = stab.push(fit.perimeter, frame.timestamp)
        if verbose:
            emit(record(frame.timestamp, fit.perimeter, False, stab.last_sigma))
        if reading is not None:
            emit(record(reading.window_end, reading.value, True, reading.sigma))
            emitted += 1
    return emitted


def cmd_measure(args) -> int:
    cfg = _run_config(args)
    model_path = args.model or cfg.model
    if not model_path:
        raise CliError(EXIT_CONFIG, "no --model given")
    model = _load_model(model_path)
    if model.direction == V2P:
        try:
            estimate_volume(model, evaluate(model, model.valid_range[0]).value)
        except NotMonotone as exc:
            raise CliError(EXIT_CONFIG, f"model cannot be inverted: {exc}") from exc
    wells = []
    for item in args.wells or []:
        well, sep, spec = item.partition("=")
        if not sep or not well or not spec:
            raise CliError(EXIT_CONFIG, f"--wells expects ID=SOURCE, got {item!r}")
        wells.append((well, spec))
    if not wells:
        spec = args.source or cfg.source
        if not spec:
            raise CliError(EXIT_CONFIG, "no --source given")
        wells = [(model.well_id or None, spec)]

    fh, close = _open_out(args.out)
    lock = threading.Lock()

    def emit(rec):
        line = json.dumps({k: rec[k] for k in READING_FIELDS}) + "\n"
        with lock:
            fh.write(line)
            fh.flush()

    def run(well, spec):
        emitted = 0
        try:
            frames = open_source(spec, args.pattern, cfg.frame_interval)
            emitted = _measure_stream(frames, model, cfg, well, emit, args.raw)
        except FluidLevelError as exc:
            log.error("well %s: source failed: %s", well, exc)
            return emitted, exc
        return emitted, None

    try:
        if len(wells) == 1:
            results = [run(*wells[0])]
        else:
            with ThreadPoolExecutor(max_workers=len(wells)) as pool:
                results = list(pool.map(lambda w: run(*w), wells))
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    finally:
        if close:
            fh.close()
    if any(err is not None and n == 0 for n, err in results):
        raise CliError(EXIT_NO_DATA, "source failed before any reading")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    profile = cfg.scene.meniscus
    models = [(Path(p).stem, _load_model(p)) for p in args.model]
    truth, _ = _load_dataset(args.truth, cfg, args.use_expected)
    reports = {}
    try:
        for name, model in models:
            reports[name] = error_report(model, truth, profile)
    except (NotMonotone, OutOfRange) as exc:
        raise CliError(EXIT_NUMERIC, f"{name}: {exc}") from exc
    summary_path = args.summary or str(Path(args.out).with_name(Path(args.out).stem + "_summary.csv"))
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for name, rep in reports.items():
                for (v, p), err, reg, extra in zip(truth, rep.errors_ul, rep.regions,
                                                   rep.extrapolated):
                    w.writerow([name, _fmt(v), _fmt(p), _fmt(v + err / 1000.0), _fmt(err),
                                reg.value, int(extra)])
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            for (name, model), rep in zip(models, reports.values()):
                by_region = [_fmt(rep.per_region[r][1]) if r in rep.per_region else ""
                             for r in Region]
                w.writerow([name, model.kind, model.order, len(rep.errors_ul),
                            _fmt(rep.mean_abs_error), _fmt(rep.max_abs_error),
                            _fmt(rep.rss_ml2), *by_region])
        if args.plot:
            from .plotting import plot_error_comparison
            plot_error_comparison(args.plot, reports, profile)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write report: {exc}") from exc
    for name, rep in reports.items():
        print(f"{name}: n={len(rep.errors_ul)} mae={rep.mean_abs_error:.1f} ul "
              f"max={rep.max_abs_error:.1f} ul")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the scene seed")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="fluidlevel",
        description="Measure fluid volume in a well from the apparent size of an LED.",
        epilog="Sources: dir:<path>, file:<path> or an http(s):// MJPEG URL. "
               "Exit codes: 0 ok, 2 config/model, 3 I/O, 4 no data, 5 fit failure.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="render a synthetic fill sweep as PGM frames + manifest.csv")
    p.add_argument("--v-start", type=float, default=0.2, help="first volume, ml")
    p.add_argument("--v-end", type=float, default=3.0, help="last volume, ml")
    p.add_argument("--steps", type=int, default=57)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--occlusion", type=float, help="occluded fraction of the spot area")
    p.add_argument("--wet", action="store_true", help="pre-wetted well (no dry droplets)")
    p.add_argument("--plot", metavar="PNG", help="also draw the response curve")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common],
                       help="fit the spot ellipse in every frame, CSV out")
    p.add_argument("--source", help="dir:<path>, file:<path> or MJPEG URL")
    p.add_argument("--pattern", help="filename glob for dir: sources")
    p.add_argument("--strict", action="store_true", help="abort on undecodable files")
    p.add_argument("--threshold", type=int, help="fixed binarization level (default Otsu)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", parents=[common],
                       help="fit a perimeter/volume model from points or a sweep manifest")
    p.add_argument("--input", required=True,
                   help="CSV with volume_ml,perimeter_px or a simulate manifest.csv")
    p.add_argument("--kind", choices=["poly", "linear2"], default="poly")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--direction", choices=[P2V, V2P], default=P2V)
    p.add_argument("--all-points", action="store_true",
                   help="fit every manifest row instead of 2 points per region")
    p.add_argument("--use-expected", action="store_true",
                   help="use the manifest's model perimeters instead of measuring frames")
    p.add_argument("--well-id", default="")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("measure", parents=[common],
                       help="stream stabilized volume readings as NDJSON")
    p.add_argument("--source")
    p.add_argument("--wells", action="append", metavar="ID=SOURCE",
                   help="run one pipeline per well concurrently (repeatable)")
    p.add_argument("--pattern")
    p.add_argument("--model")
    p.add_argument("--window", type=int)
    p.add_argument("--sigma-threshold", type=float)
    p.add_argument("--absolute", action="store_true",
                   help="sigma threshold in pixels instead of a fraction of the mean")
    p.add_argument("--raw", action="store_true",
                   help="also emit every per-frame reading with stabilized=false")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("evaluate", parents=[common],
                       help="volume errors of one or more models against truth data")
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--truth", required=True,
                   help="CSV with volume_ml,perimeter_px or a simulate manifest.csv")
    p.add_argument("--use-expected", action="store_true")
    p.add_argument("--out", required=True, help="per-point CSV")
    p.add_argument("--summary", help="per-model CSV (default <out>_summary.csv)")
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"fluidlevel {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
