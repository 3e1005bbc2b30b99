"""Command line front end: ``chsplice simulate | splice | resolution``.

Exit codes: 0 success, 1 scenario/grid error, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .channel_model import delay_resolution
from .eval_harness import ScenarioConfig, run_scenario
from .splicer import dictionary_for, omp, path_estimates, stack_measurements
from .traces import (
    ConfigError,
    TraceFormatError,
    TraceGridError,
    estimate_rows,
    load_config,
    read_trace,
    trace_from_report,
    write_ecdf,
    write_estimates,
    write_peaks,
    write_trace,
)

EXIT_OK, EXIT_SCENARIO, EXIT_PARSE = 0, 1, 2


def _fail(code: int, msg: str) -> int:
    print(f"chsplice: error: {msg}", file=sys.stderr)
    return code


def _apply_subset(cfg: ScenarioConfig, text: str) -> ScenarioConfig:
    """``0.5`` is a fraction; anything with a comma (``0,2`` or ``3,``) is an explicit band list."""
    if "," in text:
        bands = tuple(int(b) for b in text.split(",") if b.strip())
        return replace(cfg, subset_policy="explicit", subset_bands=bands)
    return replace(cfg, subset_fraction=float(text))


def manifest(cfg: ScenarioConfig, config_path: str | None, outputs: list[str]) -> dict:
    return {
        "tool": "chsplice",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config_path": config_path,
        "seed": cfg.seed,
        "config": asdict(cfg),
        "outputs": outputs,
    }


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.packets is not None:
            cfg = replace(cfg, packets=args.packets)
        if args.grid_factor is not None:
            cfg = replace(cfg, grid_factor=args.grid_factor)
        if args.subset is not None:
            cfg = _apply_subset(cfg, args.subset)
        cfg.bands()  # reject subsets that do not fit the band plan before running
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_PARSE, str(exc))

    try:
        report = run_scenario(cfg, workers=args.workers, keep_cfr=args.dump_cfr)
    except ValueError as exc:
        return _fail(EXIT_SCENARIO, f"scenario: {exc}")
    for p in report.packets:
        if not p.ok:
            print(f"chsplice: packet {p.packet} failed: {p.error}", file=sys.stderr)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    write_peaks(out / "peaks.csv", report)
    write_ecdf(out / "ecdf.csv", report)
    write_estimates(out / "estimates.csv",
                    (row for p in report.packets for row in estimate_rows(p.packet, p.estimates)))
    outputs = ["report.json", "peaks.csv", "ecdf.csv", "estimates.csv"]
    if args.dump_cfr:
        write_trace(out / "cfr_trace.csv", trace_from_report(report))
        outputs.append("cfr_trace.csv")
    (out / "manifest.json").write_text(
        json.dumps(manifest(cfg, str(args.config), outputs), indent=2, sort_keys=True) + "\n")
    print(f"{len(report.packets)} packets, {report.fraction_within(1.0):.0%} within 1 sample "
          f"-> {out}")
    return EXIT_OK


def cmd_splice(args) -> int:
    try:
        trace = read_trace(args.trace)
    except TraceFormatError as exc:
        return _fail(EXIT_PARSE, f"{args.trace}: {exc}")
    except TraceGridError as exc:
        return _fail(EXIT_SCENARIO, f"{args.trace}: {exc}")

    sparsity = args.sparsity or trace.sparsity or 2
    plan = trace.band_plan()
    rows = []
    dictionary = None
    try:
        for p, meas in enumerate(trace.packets):
            stacked = stack_measurements(meas, plan)
            if dictionary is None:
                dictionary = dictionary_for(stacked, args.grid_factor)
            result = omp(stacked, dictionary, sparsity, args.tol)
            rows.extend(estimate_rows(p, path_estimates(result, dictionary)))
    except ValueError as exc:
        return _fail(EXIT_SCENARIO, str(exc))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_estimates(out / "splice.csv", rows)
    print(f"{len(trace.packets)} packets spliced from {len(trace.bands)} bands -> {out / 'splice.csv'}")
    return EXIT_OK


def resolution_table(band_bw: float, bands: int) -> list[tuple[str, float, float, float]]:
    """Rows ``(label, bandwidth Hz, delay s, distance m)`` for one band and M bands."""
    single = delay_resolution(band_bw)
    spliced = delay_resolution(bands * band_bw)
    return [("single band", band_bw, *single), (f"{bands} bands", bands * band_bw, *spliced)]


def cmd_resolution(args) -> int:
    if args.subcarriers is not None:
        band_bw = args.subcarriers * args.spacing_khz * 1e3
    elif args.band_bw_mhz is not None:
        band_bw = args.band_bw_mhz * 1e6
    elif args.total_bw_mhz is not None:
        band_bw = args.total_bw_mhz * 1e6 / args.bands
    else:
        return _fail(EXIT_PARSE, "give --band-bw-mhz, --total-bw-mhz or --subcarriers")
    if band_bw <= 0 or args.bands < 1:
        return _fail(EXIT_PARSE, "bandwidths and band count must be positive")
    print(f"{'':<12} {'bw_mhz':>10} {'delay_ns':>10} {'distance_m':>11}")
    for label, bw, dt, dm in resolution_table(band_bw, args.bands):
        print(f"{label:<12} {bw / 1e6:>10.4f} {dt * 1e9:>10.4f} {dm:>11.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chsplice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chsplice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation scenario from a config file")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--packets", type=int)
    sim.add_argument("--grid-factor", type=int)
    sim.add_argument("--subset", help="fraction of bands (0.5) or explicit 0-based list (0,2)")
    sim.add_argument("--out-dir", default="out")
    sim.add_argument("--dump-cfr", action="store_true", help="also write cfr_trace.csv")
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    spl = sub.add_parser("splice", help="splice CFRs from a trace file")
    spl.add_argument("trace")
    spl.add_argument("--grid-factor", type=int, default=3)
    spl.add_argument("--sparsity", type=int, help="paths to recover (default: trace header, else 2)")
    spl.add_argument("--tol", type=float, default=0.0)
    spl.add_argument("--out-dir", default="out")
    spl.set_defaults(func=cmd_splice)

    res = sub.add_parser("resolution", help="print single-band and spliced delay resolution")
    res.add_argument("--bands", type=int, default=1)
    res.add_argument("--band-bw-mhz", type=float)
    res.add_argument("--total-bw-mhz", type=float)
    res.add_argument("--subcarriers", type=int)
    res.add_argument("--spacing-khz", type=float, default=312.5)
    res.set_defaults(func=cmd_resolution)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
