"""Command line interface.

Subcommands cover the walk solver, the four canned experiments, the three
fitters, and a standalone trace decoder.  Every command prints a JSON
report to stdout; --out writes report.json (and tables with --format csv)
into a directory.

Exit codes: 0 success, 2 configuration or validation problems, 3 trace
decoding failures, 4 resource limits.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from .errors import QGaltonError, ResourceLimitError
from .experiments import (
    EXPERIMENTS,
    ExperimentOutput,
    config_from_dict,
    load_config,
    render_report,
    run_experiment,
    write_outputs,
)
from .readout import FLAG_NAMES, LineConfig, TraceEvents, decode
from .source import t2_of_wavelength
from .stats import fit_exponential, fit_poisson, fit_t2
from .walk import Coupler, build_mesh, path_sum_oracle, propagate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DECODE = 3
EXIT_RESOURCE = 4


class DecodeFailure(Exception):
    """Raised by decode-trace when no usable events come out."""


def _read_numbers(path: str) -> np.ndarray:
    """Numbers from a JSON array file or whitespace/comma separated text."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("["):
        return np.asarray(json.loads(text), dtype=float)
    tokens = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    return np.asarray([float(t) for t in tokens], dtype=float)


def _read_trace(path: str) -> TraceEvents:
    """Trace from a two-column CSV (time_ns, amplitude), header optional."""
    times = []
    amps = []
    for line_no, line in enumerate(Path(path).read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DecodeFailure(
                f"{path}:{line_no + 1}: expected two comma-separated columns"
            )
        try:
            t, a = float(parts[0]), float(parts[1])
        except ValueError:
            if line_no == 0:
                continue  # header row
            raise DecodeFailure(
                f"{path}:{line_no + 1}: could not parse {line!r}"
            ) from None
        times.append(t * 1e-9)
        amps.append(a)
    if not times:
        raise DecodeFailure(f"{path}: no pulses found")
    return TraceEvents(np.asarray(times), np.asarray(amps))


def _emit(report: dict, tables: dict, args) -> None:
    out = ExperimentOutput(report=report, tables=tables)
    write_outputs(out, args.out, args.format)
    sys.stdout.write(render_report(report))


def cmd_simulate_walk(args) -> int:
    if args.t_squared is not None and args.wavelength_nm is not None:
        raise QGaltonError("give --t-squared or --wavelength-nm, not both")
    if args.t_squared is not None:
        t2 = args.t_squared
    elif args.wavelength_nm is not None:
        t2 = t2_of_wavelength(args.wavelength_nm)
    else:
        t2 = t2_of_wavelength(1550.0)
    mesh = build_mesh(args.stages)
    coupler = Coupler.from_t_squared(t2)
    dist = propagate(mesh, coupler, args.input_port)
    report = {
        "stages": args.stages,
        "t_squared": t2,
        "input_port": args.input_port,
        "n_bins": mesh.n_bins,
        "probabilities": dist.probabilities.tolist(),
    }
    if args.check_oracle:
        oracle = path_sum_oracle(mesh, coupler, args.input_port)
        report["oracle_max_abs_diff"] = float(
            np.abs(dist.probabilities - oracle.probabilities).max())
    tables = {
        "distribution": (
            ["bin", "probability"],
            [(b, repr(float(p))) for b, p in enumerate(dist.probabilities)],
        ),
    }
    _emit(report, tables, args)
    return EXIT_OK


def cmd_run(args) -> int:
    if args.config:
        config = load_config(args.config, args.experiment, seed=args.seed)
    else:
        config = config_from_dict(args.experiment, {}, seed=args.seed)
    output = run_experiment(config)
    write_outputs(output, args.out, args.format)
    sys.stdout.write(render_report(output.report))
    return EXIT_OK


def cmd_fit_t2(args) -> int:
    values = _read_numbers(args.input)
    counts = values.astype(np.int64)
    if np.any(values != counts):
        raise QGaltonError("histogram entries must be integers")
    fit = fit_t2(counts, n_bootstrap=args.bootstrap, seed=args.seed,
                 input_port=args.input_port)
    _emit({"fit": fit.to_dict()}, {}, args)
    return EXIT_OK


def cmd_fit_poisson(args) -> int:
    values = _read_numbers(args.input)
    counts = values.astype(np.int64)
    if np.any(values != counts):
        raise QGaltonError("window counts must be integers")
    fit = fit_poisson(counts, n_bootstrap=args.bootstrap, seed=args.seed)
    _emit({"fit": fit.to_dict()}, {}, args)
    return EXIT_OK


def cmd_fit_exponential(args) -> int:
    gaps = _read_numbers(args.input)
    fit = fit_exponential(gaps, n_bootstrap=args.bootstrap, seed=args.seed)
    report = {"fit": fit.to_dict(), "units": "same as input (ns expected)"}
    _emit(report, {}, args)
    return EXIT_OK


def cmd_decode_trace(args) -> int:
    trace = _read_trace(args.input)
    line = LineConfig(
        segment_delay=args.segment_delay_ns * 1e-9,
        pixel_count=args.pixel_count,
        attenuation_per_segment=args.attenuation,
        base_amplitude=args.base_amplitude,
        trigger_polarity=args.trigger_polarity,
    )
    try:
        dec = decode(trace, line)
    except QGaltonError as exc:
        raise DecodeFailure(str(exc)) from exc
    if len(dec) == 0 or not dec.ok.any():
        raise DecodeFailure("no pulse pairs decoded from the trace")
    flags = {name: int((dec.flags == i).sum())
             for i, name in enumerate(FLAG_NAMES)}
    rows = []
    for px, t, fl in zip(dec.pixels, dec.origin_times, dec.flags):
        t_ns = float("nan") if np.isnan(t) else t * 1e9
        rows.append((int(px), repr(float(t_ns)), FLAG_NAMES[fl]))
    report = {
        "n_pulses": len(trace),
        "n_events": len(dec),
        "n_ok": int(dec.ok.sum()),
        "flags": flags,
        "events": [
            {"pixel": int(px), "origin_time_ns": None if np.isnan(t) else t * 1e9,
             "flag": FLAG_NAMES[fl]}
            for px, t, fl in zip(dec.pixels, dec.origin_times, dec.flags)
        ],
    }
    tables = {"events": (["pixel", "origin_time_ns", "flag"], rows)}
    _emit(report, tables, args)
    return EXIT_OK


def _add_common_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="directory for output files")
    p.add_argument("--format", default="json", choices=("json", "csv"),
                   help="output layout: json writes report.json only, csv "
                        "adds the tables")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgalton",
        description="Photonic Galton board simulator and analysis tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-walk",
                       help="bin distribution out of the coupler mesh")
    p.add_argument("--stages", type=int, default=8)
    p.add_argument("--t-squared", type=float, default=None)
    p.add_argument("--wavelength-nm", type=float, default=None)
    p.add_argument("--input-port", default="left",
                   choices=("left", "right"))
    p.add_argument("--check-oracle", action="store_true",
                   help="cross-check against explicit path enumeration")
    _add_common_output(p)
    p.set_defaults(func=cmd_simulate_walk)

    p = sub.add_parser("run", help="run a full experiment")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    _add_common_output(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit-t2",
                       help="fit coupler transmission to a bin histogram")
    p.add_argument("--input", required=True,
                   help="JSON array or whitespace separated counts")
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-port", default="left", choices=("left", "right"))
    _add_common_output(p)
    p.set_defaults(func=cmd_fit_t2)

    p = sub.add_parser("fit-poisson",
                       help="fit a Poisson mean to per-window counts")
    p.add_argument("--input", required=True)
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    _add_common_output(p)
    p.set_defaults(func=cmd_fit_poisson)

    p = sub.add_parser("fit-exponential",
                       help="fit an exponential mean to inter-arrival gaps")
    p.add_argument("--input", required=True,
                   help="gaps in nanoseconds")
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    _add_common_output(p)
    p.set_defaults(func=cmd_fit_exponential)

    p = sub.add_parser("decode-trace",
                       help="recover events from a pulse-train CSV")
    p.add_argument("--input", required=True,
                   help="CSV with time_ns,amplitude columns")
    p.add_argument("--segment-delay-ns", type=float, default=0.9)
    p.add_argument("--pixel-count", type=int, default=16)
    p.add_argument("--attenuation", type=float, default=0.97)
    p.add_argument("--base-amplitude", type=float, default=1.0)
    p.add_argument("--trigger-polarity", default="negative",
                   choices=("negative", "positive"))
    _add_common_output(p)
    p.set_defaults(func=cmd_decode_trace)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except DecodeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except (QGaltonError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
