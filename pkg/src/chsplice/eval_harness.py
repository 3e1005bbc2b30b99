"""Scenario runner for the splicing simulations.

One scenario = a band plan, a multipath profile, a noise level and a
splicer configuration, evaluated over independent packets. Every packet is
compared to the true path delays and to a wideband least-squares reference
CIR measured over the whole ``total_bw`` in one band.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel_model import NoiseModel, PathSpec, SparseChannel, make_sparse_channel
from .ofdm_link import (
    WIFI_SUBCARRIER_SPACING,
    BandPlan,
    CfrMeasurement,
    PilotGrid,
    build_band_plan,
    cfr_to_cir,
    ls_estimate_freq,
    measure_plan,
)
from .splicer import Dictionary, dictionary_for, omp, path_estimates, stack_measurements

SUBSET_POLICIES = ("alternating", "lowest", "explicit")


@dataclass(frozen=True)
class ScenarioConfig:
    total_bw: float = 160e6
    sub_bw: float = 20e6
    center: float = 5e9
    spacing: float = WIFI_SUBCARRIER_SPACING
    delays: tuple[float, ...] = (0.0, 18.75e-9)
    powers_db: tuple[float, ...] = (0.0, -2.0)
    gain_mode: str = "deterministic"
    snr_db: float | None = 30.0  # None = noiseless
    subset_fraction: float = 1.0
    subset_policy: str = "alternating"
    subset_bands: tuple[int, ...] | None = None
    grid_factor: int = 3
    sparsity: int | None = None  # defaults to the number of paths
    tol: float = 0.0
    packets: int = 20
    seed: int = 0
    match_window: float = 3.0  # wideband samples

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))
        object.__setattr__(self, "powers_db", tuple(float(p) for p in self.powers_db))
        if self.subset_bands is not None:
            object.__setattr__(self, "subset_bands", tuple(int(b) for b in self.subset_bands))
        if len(self.delays) != len(self.powers_db) or not self.delays:
            raise ValueError("need one power per delay and at least one path")
        if not 0 < self.subset_fraction <= 1:
            raise ValueError("subset fraction must lie in (0, 1]")
        if self.subset_policy not in SUBSET_POLICIES:
            raise ValueError(f"unknown subset policy {self.subset_policy!r}")
        if self.packets < 1:
            raise ValueError("need at least one packet")
        if self.match_window < 0:
            raise ValueError("match window must be non-negative")

    @property
    def path_specs(self) -> list[PathSpec]:
        return [PathSpec(d, p, self.gain_mode) for d, p in zip(self.delays, self.powers_db)]

    @property
    def num_paths(self) -> int:
        return len(self.delays)

    @property
    def omp_sparsity(self) -> int:
        return self.num_paths if self.sparsity is None else self.sparsity

    @property
    def sample_duration(self) -> float:
        return 1.0 / self.total_bw

    def band_plan(self) -> BandPlan:
        return build_band_plan(self.total_bw, self.sub_bw, self.center, self.spacing)

    def reference_plan(self) -> BandPlan:
        return build_band_plan(self.total_bw, self.total_bw, self.center, self.spacing)

    def bands(self) -> tuple[int, ...]:
        plan = self.band_plan()
        if self.subset_policy == "explicit":
            return select_subbands(plan, self.subset_fraction, "explicit", self.subset_bands)
        return select_subbands(plan, self.subset_fraction, self.subset_policy)


def select_subbands(plan: BandPlan | int, fraction: float = 1.0, policy: str = "alternating",
                    explicit: Sequence[int] | None = None) -> tuple[int, ...]:
    """Pick ``fraction * M`` bands (0-based indices).

    ``alternating`` spreads the picks evenly from the lowest band (every other
    band at 0.5), ``lowest`` takes the lowest bands, ``explicit`` returns
    ``explicit`` after validation (``fraction`` is ignored).
    """
    num_bands = plan if isinstance(plan, int) else plan.num_bands
    if policy == "explicit":
        if not explicit:
            raise ValueError("explicit policy needs a band list")
        picked = sorted(int(b) for b in explicit)
        if len(set(picked)) != len(picked) or picked[0] < 0 or picked[-1] >= num_bands:
            raise ValueError(f"invalid explicit band list {list(explicit)} for {num_bands} bands")
        return tuple(picked)

    k_real = fraction * num_bands
    k = int(round(k_real))
    if k < 1 or abs(k_real - k) > 1e-9:
        raise ValueError(f"{fraction} of {num_bands} bands is not a positive whole number of bands")
    if policy == "lowest":
        return tuple(range(k))
    if policy == "alternating":
        return tuple((i * num_bands) // k for i in range(k))
    raise ValueError(f"unknown subset policy {policy!r}")


@dataclass
class PathMatch:
    true_delay: float
    est_delay: float | None = None
    error_samples: float | None = None  # signed, (est - true) / sample
    coefficient: complex | None = None

    @property
    def missed(self) -> bool:
        return self.est_delay is None


@dataclass
class PeakMatchReport:
    matches: list[PathMatch]
    sample_duration: float
    unmatched_estimates: list[float] = field(default_factory=list)

    @property
    def num_missed(self) -> int:
        return sum(m.missed for m in self.matches)

    def within(self, samples: float) -> bool:
        """True if every true path is matched with ``|error| <= samples``."""
        return all(not m.missed and abs(m.error_samples) <= samples + 1e-9 for m in self.matches)


def match_peaks(estimated, truth: Sequence[float], total_bw: float,
                window: float = 3.0) -> PeakMatchReport:
    """Greedy one-to-one nearest-delay matching.

    ``estimated`` holds delays or ``(delay, coefficient)`` pairs. Candidate
    pairs closer than ``window`` wideband samples are assigned in order of
    increasing distance; true paths left over are reported missed.
    """
    if window < 0:
        raise ValueError("window must be non-negative")
    est = [(e, None) if np.isscalar(e) else (e[0], e[1]) for e in estimated]
    est = [(float(d), c) for d, c in est]
    sample = 1.0 / total_bw
    limit = window * sample * (1 + 1e-12)

    cands = sorted(
        (abs(d - t), ti, ei)
        for ti, t in enumerate(truth)
        for ei, (d, _) in enumerate(est)
        if abs(d - t) <= limit
    )
    matches = [PathMatch(float(t)) for t in truth]
    used_t, used_e = set(), set()
    for _, ti, ei in cands:
        if ti in used_t or ei in used_e:
            continue
        used_t.add(ti)
        used_e.add(ei)
        d, c = est[ei]
        matches[ti] = PathMatch(float(truth[ti]), d, (d - truth[ti]) / sample, c)
    leftovers = [est[i][0] for i in range(len(est)) if i not in used_e]
    return PeakMatchReport(matches, sample, leftovers)


@dataclass
class EcdfSeries:
    values: np.ndarray
    probabilities: np.ndarray


def ecdf(values) -> EcdfSeries:
    """Empirical CDF with tied values collapsed into one step."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("ECDF of an empty sample")
    steps, counts = np.unique(values, return_counts=True)
    return EcdfSeries(steps, np.cumsum(counts) / values.size)


def reference_peaks(taps: np.ndarray, sample_duration: float, count: int) -> list[float]:
    """Delays of the ``count`` strongest taps, ascending.

    Taps rather than local maxima: paths one tap apart (e.g. 0 and 12.5 ns at
    80 MHz) would otherwise merge into one peak.
    """
    idx = np.argsort(-np.abs(taps), kind="stable")[:count]
    return sorted(float(i * sample_duration) for i in idx)


def wideband_reference(channel: SparseChannel, cfg: ScenarioConfig, noise: NoiseModel):
    """LS CIR over a single ``total_bw`` band: ``(taps, tap_duration)``."""
    plan = cfg.reference_plan()
    rx = measure_plan(channel, plan, noise)[0]
    est = ls_estimate_freq(rx, PilotGrid.ones(0, plan.num_subcarriers))
    return cfr_to_cir(est.samples), 1.0 / plan.band_bw


@dataclass
class PacketResult:
    packet: int
    estimates: list[tuple[float, complex]] = field(default_factory=list)
    truth_match: PeakMatchReport | None = None
    reference_delays: list[float] = field(default_factory=list)
    reference_match: PeakMatchReport | None = None
    error: str | None = None
    measurements: list[CfrMeasurement] | None = None  # only with keep_cfr

    @property
    def ok(self) -> bool:
        return self.error is None


def packet_seeds(master: int, packet: int) -> tuple[int, int, int]:
    """Counter-based split of the master seed: channel, noise, reference noise."""
    state = np.random.SeedSequence(master, spawn_key=(packet,)).generate_state(3, dtype=np.uint64)
    return tuple(int(s) for s in state)


def run_packet(cfg: ScenarioConfig, packet: int, plan: BandPlan, bands: Sequence[int],
               dictionary: Dictionary | None, keep_cfr: bool = False) -> PacketResult:
    ch_seed, noise_seed, ref_seed = packet_seeds(cfg.seed, packet)
    res = PacketResult(packet)
    try:
        channel = make_sparse_channel(cfg.path_specs, ch_seed)
        meas = measure_plan(channel, plan, NoiseModel.from_db(cfg.snr_db, noise_seed), bands)
        if keep_cfr:
            res.measurements = meas
        stacked = stack_measurements(meas, plan)
        if dictionary is None:
            dictionary = dictionary_for(stacked, cfg.grid_factor)
        result = omp(stacked, dictionary, cfg.omp_sparsity, cfg.tol)
        res.estimates = path_estimates(result, dictionary)
        res.truth_match = match_peaks(res.estimates, cfg.delays, cfg.total_bw, cfg.match_window)

        taps, tap_dt = wideband_reference(channel, cfg, NoiseModel.from_db(cfg.snr_db, ref_seed))
        res.reference_delays = reference_peaks(taps, tap_dt, cfg.num_paths)
        res.reference_match = match_peaks(res.estimates, res.reference_delays, cfg.total_bw,
                                          cfg.match_window)
    except (ValueError, np.linalg.LinAlgError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
    return res


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    bands: tuple[int, ...]
    packets: list[PacketResult]

    @property
    def sample_duration(self) -> float:
        return self.config.sample_duration

    def path_errors(self, path: int) -> np.ndarray:
        """Signed errors (wideband samples) of one true path; NaN when missed or failed."""
        out = []
        for p in self.packets:
            m = p.truth_match.matches[path] if p.truth_match else None
            out.append(np.nan if m is None or m.missed else m.error_samples)
        return np.array(out)

    def fraction_within(self, samples: float) -> float:
        """Fraction of packets whose every path is matched within ``samples``."""
        return float(np.mean([p.ok and p.truth_match.within(samples) for p in self.packets]))

    def fraction_with_miss(self) -> float:
        return float(np.mean([not p.ok or p.truth_match.num_missed > 0 for p in self.packets]))

    def path_ecdf(self, path: int) -> EcdfSeries | None:
        est = [p.truth_match.matches[path].est_delay for p in self.packets if p.ok]
        est = [e for e in est if e is not None]
        return ecdf(est) if est else None

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        packets = []
        for p in self.packets:
            packets.append({
                "packet": p.packet,
                "error": p.error,
                "estimates": [{"delay_s": d, "gain": [c.real, c.imag]} for d, c in p.estimates],
                "reference_delays_s": p.reference_delays,
                "truth_match": _match_dict(p.truth_match),
                "reference_match": _match_dict(p.reference_match),
            })
        ecdfs = []
        for k in range(self.config.num_paths):
            series = self.path_ecdf(k)
            ecdfs.append({
                "path": k,
                "true_delay_s": self.config.delays[k],
                "delay_s": [] if series is None else series.values.tolist(),
                "probability": [] if series is None else series.probabilities.tolist(),
            })
        return {
            "config": cfg,
            "bands": list(self.bands),
            "sample_duration_s": self.sample_duration,
            "summary": {
                "packets": len(self.packets),
                "failed_packets": sum(not p.ok for p in self.packets),
                "fraction_within_1_sample": self.fraction_within(1.0),
                "fraction_with_missed_path": self.fraction_with_miss(),
            },
            "packets": packets,
            "ecdf": ecdfs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _match_dict(report: PeakMatchReport | None):
    if report is None:
        return None
    return [{
        "true_delay_s": m.true_delay,
        "est_delay_s": m.est_delay,
        "error_samples": m.error_samples,
        "missed": m.missed,
    } for m in report.matches]


def run_scenario(cfg: ScenarioConfig, workers: int = 1, keep_cfr: bool = False) -> ScenarioReport:
    """Run all packets of a scenario; deterministic for a given ``cfg.seed``.

    Packets are independent and may run on a thread pool; results are kept in
    packet order. ``keep_cfr`` retains the measured CFRs on each packet.
    """
    plan = cfg.band_plan()
    bands = cfg.bands()
    # the dictionary depends only on which bands are stacked
    probe = stack_measurements(measure_plan(SparseChannel([0.0], [1.0]), plan, None, bands), plan)
    dictionary = dictionary_for(probe, cfg.grid_factor)

    def one(k):
        return run_packet(cfg, k, plan, bands, dictionary, keep_cfr)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            packets = list(pool.map(one, range(cfg.packets)))
    else:
        packets = [one(k) for k in range(cfg.packets)]
    return ScenarioReport(cfg, bands, packets)


# Scenarios from the simulation study (5 GHz, 160 MHz total).

TWO_PATH_DELAYS = (0.0, 18.75e-9)
TWO_PATH_POWERS_DB = (0.0, -2.0)
FOUR_PATH_DELAYS = (0.0, 18.75e-9, 200e-9, 218.75e-9)
FOUR_PATH_POWERS_DB = (0.0, 0.0, -2.0, 0.0)


def two_path_scenario(sub_bw: float, fraction: float = 1.0, **overrides) -> ScenarioConfig:
    base = ScenarioConfig(total_bw=160e6, sub_bw=sub_bw, center=5e9,
                          delays=TWO_PATH_DELAYS, powers_db=TWO_PATH_POWERS_DB,
                          gain_mode="rayleigh", subset_fraction=fraction)
    return replace(base, **overrides)


def four_path_scenario(sub_bw: float = 40e6, fraction: float = 1.0, **overrides) -> ScenarioConfig:
    base = ScenarioConfig(total_bw=160e6, sub_bw=sub_bw, center=5e9,
                          delays=FOUR_PATH_DELAYS, powers_db=FOUR_PATH_POWERS_DB,
                          gain_mode="rayleigh", subset_fraction=fraction)
    return replace(base, **overrides)


def ecdf_scenario(fraction: float = 1.0, **overrides) -> ScenarioConfig:
    """100-packet fading run at 2.45 GHz, 4 x 20 MHz, paths at 0 and 12.5 ns."""
    base = ScenarioConfig(total_bw=80e6, sub_bw=20e6, center=2.45e9,
                          delays=(0.0, 12.5e-9), powers_db=(0.0, -2.0),
                          gain_mode="rayleigh", subset_fraction=fraction, packets=100)
    return replace(base, **overrides)
