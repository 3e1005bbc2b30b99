"""File formats: scenario config files, CFR trace files and result CSVs.

Column layouts are fixed; see docs/formats.md.
"""
from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .eval_harness import PeakMatchReport, ScenarioConfig, ScenarioReport, match_peaks
from .ofdm_link import BandPlan, CfrMeasurement, build_band_plan, subcarrier_freqs

TRACE_MAGIC = "# chsplice cfr trace v1"
TRACE_COLUMNS = ("packet", "band", "subcarrier", "real", "imag")
ESTIMATE_COLUMNS = ("packet", "rank", "delay_ns", "gain_abs", "gain_phase_rad")
PEAK_COLUMNS = ("packet", "path", "true_delay_ns", "est_delay_ns", "error_samples", "missed",
                "ref_delay_ns")
ECDF_COLUMNS = ("path", "true_delay_ns", "delay_ns", "probability")


class ConfigError(ValueError):
    """Config file is unreadable or malformed."""


class TraceFormatError(ValueError):
    """Trace file cannot be parsed or has holes in its grid."""


class TraceGridError(ValueError):
    """Trace parses but disagrees with its own header band plan."""


# ---------------------------------------------------------------- configs

_CONFIG_KEYS = {
    "band_plan": {"total_bw_mhz", "sub_bw_mhz", "center_ghz", "spacing_khz"},
    "channel": {"delays_ns", "powers_db", "gain_mode"},
    "noise": {"snr_db"},
    "splicer": {"grid_factor", "sparsity", "tol"},
    "run": {"packets", "seed", "subset_fraction", "subset_policy", "subset_bands",
            "match_window_samples"},
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def parse_config(text: str) -> ScenarioConfig:
    """Parse the sectioned key-value scenario format into a config.

    Raises ConfigError on syntax errors, unknown keys or bad values.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - _CONFIG_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    kw = {}
    try:
        for key, sec, name, scale in (
            ("total_bw", "band_plan", "total_bw_mhz", 1e6),
            ("sub_bw", "band_plan", "sub_bw_mhz", 1e6),
            ("center", "band_plan", "center_ghz", 1e9),
            ("spacing", "band_plan", "spacing_khz", 1e3),
        ):
            val = get(sec, name)
            if val is not None:
                kw[key] = float(val) * scale
        if (val := get("channel", "delays_ns")) is not None:
            kw["delays"] = tuple(d / 1e9 for d in _floats(val))
        if (val := get("channel", "powers_db")) is not None:
            kw["powers_db"] = _floats(val)
        if (val := get("channel", "gain_mode")) is not None:
            kw["gain_mode"] = val
        if (val := get("noise", "snr_db")) is not None:
            kw["snr_db"] = None if val.lower() in ("none", "inf", "noiseless") else float(val)
        if (val := get("splicer", "grid_factor")) is not None:
            kw["grid_factor"] = int(val)
        if (val := get("splicer", "sparsity")) is not None:
            kw["sparsity"] = int(val)
        if (val := get("splicer", "tol")) is not None:
            kw["tol"] = float(val)
        if (val := get("run", "packets")) is not None:
            kw["packets"] = int(val)
        if (val := get("run", "seed")) is not None:
            kw["seed"] = int(val)
        if (val := get("run", "subset_fraction")) is not None:
            kw["subset_fraction"] = float(val)
        if (val := get("run", "subset_policy")) is not None:
            kw["subset_policy"] = val
        if (val := get("run", "subset_bands")) is not None:
            kw["subset_bands"] = tuple(int(b) for b in val.replace(",", " ").split())
        if (val := get("run", "match_window_samples")) is not None:
            kw["match_window"] = float(val)
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from exc

    if "delays" in kw and "powers_db" not in kw:
        kw["powers_db"] = (0.0,) * len(kw["delays"])
    if kw.get("gain_mode", "deterministic") not in ("deterministic", "rayleigh"):
        raise ConfigError(f"unknown gain_mode {kw['gain_mode']!r}")
    try:
        return ScenarioConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def config_to_text(cfg: ScenarioConfig) -> str:
    """Inverse of :func:`parse_config` (round-trips every field)."""
    def join(vals):
        return ", ".join(repr(float(v)) for v in vals)

    lines = [
        "[band_plan]",
        f"total_bw_mhz = {cfg.total_bw / 1e6!r}",
        f"sub_bw_mhz = {cfg.sub_bw / 1e6!r}",
        f"center_ghz = {cfg.center / 1e9!r}",
        f"spacing_khz = {cfg.spacing / 1e3!r}",
        "",
        "[channel]",
        f"delays_ns = {join(d * 1e9 for d in cfg.delays)}",
        f"powers_db = {join(cfg.powers_db)}",
        f"gain_mode = {cfg.gain_mode}",
        "",
        "[noise]",
        f"snr_db = {'none' if cfg.snr_db is None else repr(cfg.snr_db)}",
        "",
        "[splicer]",
        f"grid_factor = {cfg.grid_factor}",
    ]
    if cfg.sparsity is not None:
        lines.append(f"sparsity = {cfg.sparsity}")
    lines += [
        f"tol = {cfg.tol!r}",
        "",
        "[run]",
        f"packets = {cfg.packets}",
        f"seed = {cfg.seed}",
        f"subset_fraction = {cfg.subset_fraction!r}",
        f"subset_policy = {cfg.subset_policy}",
    ]
    if cfg.subset_bands is not None:
        lines.append(f"subset_bands = {', '.join(str(b) for b in cfg.subset_bands)}")
    lines.append(f"match_window_samples = {cfg.match_window!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- traces

@dataclass
class CfrTrace:
    total_bw: float
    sub_bw: float
    center: float
    spacing: float
    bands: tuple[int, ...]
    packets: list[list[CfrMeasurement]]
    sparsity: int | None = None

    def band_plan(self) -> BandPlan:
        return build_band_plan(self.total_bw, self.sub_bw, self.center, self.spacing)


def write_trace(path: str | Path, trace: CfrTrace) -> None:
    plan = trace.band_plan()
    idx = plan.subcarrier_indices
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_MAGIC + "\n")
        fh.write(f"# total_bw_hz={trace.total_bw!r}\n")
        fh.write(f"# sub_bw_hz={trace.sub_bw!r}\n")
        fh.write(f"# center_hz={trace.center!r}\n")
        fh.write(f"# spacing_hz={trace.spacing!r}\n")
        fh.write(f"# packets={len(trace.packets)}\n")
        fh.write(f"# bands={','.join(str(b) for b in trace.bands)}\n")
        if trace.sparsity is not None:
            fh.write(f"# sparsity={trace.sparsity}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for p, meas in enumerate(trace.packets):
            for m in sorted(meas, key=lambda x: x.band):
                for n, s in zip(idx, m.samples):
                    writer.writerow((p, m.band, int(n), repr(float(s.real)), repr(float(s.imag))))


_REQUIRED_HEADER = ("total_bw_hz", "sub_bw_hz", "center_hz", "spacing_hz", "packets", "bands")


def read_trace(path: str | Path) -> CfrTrace:
    """Parse and validate a CFR trace file.

    TraceFormatError: unparsable header/rows, duplicates, missing rows.
    TraceGridError: rows or header inconsistent with the header band plan.
    """
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise TraceFormatError(f"cannot read trace {path}: {exc}") from exc
    if not lines or lines[0].strip() != TRACE_MAGIC:
        raise TraceFormatError(f"line 1: expected {TRACE_MAGIC!r}")

    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("#"):
        body = lines[pos][1:].strip()
        if "=" not in body:
            raise TraceFormatError(f"line {pos + 1}: header entry without '='")
        key, val = body.split("=", 1)
        header[key.strip()] = val.strip()
        pos += 1
    missing = [k for k in _REQUIRED_HEADER if k not in header]
    if missing:
        raise TraceFormatError(f"header lacks {', '.join(missing)}")
    try:
        total_bw = float(header["total_bw_hz"])
        sub_bw = float(header["sub_bw_hz"])
        center = float(header["center_hz"])
        spacing = float(header["spacing_hz"])
        num_packets = int(header["packets"])
        bands = tuple(int(b) for b in header["bands"].split(","))
        sparsity = int(header["sparsity"]) if "sparsity" in header else None
    except ValueError as exc:
        raise TraceFormatError(f"header value: {exc}") from exc

    try:
        plan = build_band_plan(total_bw, sub_bw, center, spacing)
    except ValueError as exc:
        raise TraceGridError(f"header band plan: {exc}") from exc
    if len(set(bands)) != len(bands) or min(bands) < 0 or max(bands) >= plan.num_bands:
        raise TraceGridError(f"header bands {bands} invalid for {plan.num_bands} bands")
    if num_packets < 1:
        raise TraceGridError("header packet count must be positive")

    if pos >= len(lines) or tuple(c.strip() for c in lines[pos].split(",")) != TRACE_COLUMNS:
        raise TraceFormatError(f"line {pos + 1}: expected column header {','.join(TRACE_COLUMNS)}")
    half = (plan.num_subcarriers - 1) // 2
    grid: dict[tuple[int, int], dict[int, complex]] = {}
    for lineno, row in enumerate(csv.reader(lines[pos + 1:]), start=pos + 2):
        if not row:
            continue
        if len(row) != len(TRACE_COLUMNS):
            raise TraceFormatError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
        try:
            p, m, n = int(row[0]), int(row[1]), int(row[2])
            value = complex(float(row[3]), float(row[4]))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
        if not math.isfinite(value.real) or not math.isfinite(value.imag):
            raise TraceFormatError(f"line {lineno}: non-finite sample")
        if not 0 <= p < num_packets:
            raise TraceGridError(f"line {lineno}: packet {p} outside header count {num_packets}")
        if m not in bands:
            raise TraceGridError(f"line {lineno}: band {m} not listed in header bands {bands}")
        if abs(n) > half:
            raise TraceGridError(f"line {lineno}: subcarrier {n} outside +-{half}")
        cell = grid.setdefault((p, m), {})
        if n in cell:
            raise TraceFormatError(f"line {lineno}: duplicate row for packet {p} band {m} subcarrier {n}")
        cell[n] = value

    packets = []
    for p in range(num_packets):
        meas = []
        for m in bands:
            cell = grid.get((p, m), {})
            holes = [n for n in range(-half, half + 1) if n not in cell]
            if holes:
                raise TraceFormatError(
                    f"packet {p} band {m}: missing row(s) for subcarrier {', '.join(map(str, holes[:5]))}"
                    + (" ..." if len(holes) > 5 else ""))
            samples = np.array([cell[n] for n in range(-half, half + 1)])
            meas.append(CfrMeasurement(m, subcarrier_freqs(plan, m), samples, {"measured"}))
        packets.append(meas)
    return CfrTrace(total_bw, sub_bw, center, spacing, bands, packets, sparsity)


def trace_from_report(report: ScenarioReport) -> CfrTrace:
    cfg = report.config
    packets = []
    for p in report.packets:
        if p.measurements is None:
            raise ValueError(f"packet {p.packet} has no retained CFR (run with keep_cfr=True)")
        packets.append(p.measurements)
    return CfrTrace(cfg.total_bw, cfg.sub_bw, cfg.center, cfg.spacing, report.bands, packets,
                    cfg.omp_sparsity)


# ---------------------------------------------------------------- result tables

def _num(x) -> str:
    return "" if x is None else repr(float(x))


def estimate_rows(packet: int, estimates: Iterable[tuple[float, complex]]):
    for rank, (d, g) in enumerate(estimates):
        yield (packet, rank, _num(d * 1e9), _num(abs(g)), _num(np.angle(g)))


def write_estimates(path: str | Path, rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ESTIMATE_COLUMNS)
        writer.writerows(rows)


def write_peaks(path: str | Path, report: ScenarioReport) -> None:
    cfg = report.config
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PEAK_COLUMNS)
        for p in report.packets:
            if p.ok:
                ref: PeakMatchReport = match_peaks(p.reference_delays, cfg.delays, cfg.total_bw,
                                                   cfg.match_window)
                matches = p.truth_match.matches
            for k, true_delay in enumerate(cfg.delays):
                if not p.ok:
                    writer.writerow((p.packet, k, _num(true_delay * 1e9), "", "", 1, ""))
                    continue
                m, r = matches[k], ref.matches[k]
                writer.writerow((
                    p.packet, k, _num(true_delay * 1e9),
                    "" if m.missed else _num(m.est_delay * 1e9),
                    _num(m.error_samples), int(m.missed),
                    "" if r.missed else _num(r.est_delay * 1e9),
                ))


def write_ecdf(path: str | Path, report: ScenarioReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ECDF_COLUMNS)
        for k, true_delay in enumerate(report.config.delays):
            series = report.path_ecdf(k)
            if series is None:
                continue
            for v, pr in zip(series.values, series.probabilities):
                writer.writerow((k, _num(true_delay * 1e9), _num(v * 1e9), _num(pr)))
