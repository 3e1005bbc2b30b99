"""Sparse multipath channels and CFR synthesis.

A channel is a finite sum of delayed, complex-weighted impulses. Its frequency
response is evaluated directly at arbitrary (absolute) frequencies, so delays
are never quantised here. Per-band hardware distortion and complex AWGN can be
injected on top of the clean samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

GAIN_MODES = ("deterministic", "rayleigh")


@dataclass(frozen=True)
class PathSpec:
    """Statistical description of one propagation path.

    ``avg_power_db`` is relative to the strongest path (0 dB by convention).
    """

    delay: float
    avg_power_db: float = 0.0
    gain_mode: str = "deterministic"

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError(f"path delay must be non-negative, got {self.delay}")
        if self.gain_mode not in GAIN_MODES:
            raise ValueError(f"unknown gain mode {self.gain_mode!r}")


@dataclass(frozen=True, eq=False)
class SparseChannel:
    """K paths with strictly increasing delays (s) and complex gains."""

    delays: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=float).reshape(-1)
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        if delays.size == 0:
            raise ValueError("a channel needs at least one path")
        if delays.size != gains.size:
            raise ValueError("delays and gains differ in length")
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ValueError("delays must be non-negative and strictly increasing")
        delays.flags.writeable = False
        gains.flags.writeable = False
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "gains", gains)

    @property
    def num_paths(self) -> int:
        return self.delays.size

    def scaled(self, alpha: complex) -> "SparseChannel":
        return SparseChannel(self.delays, alpha * self.gains)


@dataclass(frozen=True)
class DistortionParams:
    """Timing offset (s) and phase offset (cycles) of one band."""

    timing_offset: float = 0.0
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.timing_offset < 0:
            raise ValueError("timing offset must lie in [0, 1/f_s)")
        if not 0.0 <= self.phase_offset < 1.0:
            raise ValueError("phase offset must lie in [0, 1) cycles")


@dataclass(frozen=True)
class NoiseModel:
    """Complex AWGN with variance ``1/snr`` per sample.

    ``snr=None`` is the noiseless sentinel.
    """

    snr: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.snr is not None and not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")

    @classmethod
    def from_db(cls, snr_db: float | None, seed: int = 0) -> "NoiseModel":
        if snr_db is None:
            return cls(None, seed)
        return cls(10.0 ** (snr_db / 10.0), seed)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(None, 0)

    @property
    def is_noiseless(self) -> bool:
        return self.snr is None

    @property
    def variance(self) -> float:
        return 0.0 if self.snr is None else 1.0 / self.snr


def make_sparse_channel(specs: Sequence[PathSpec], seed: int = 0) -> SparseChannel:
    """Realise one channel from path specs.

    Deterministic paths get gain ``10**(avg_power_db/20)`` with zero phase;
    Rayleigh paths draw a circular complex Gaussian gain with that average
    power. Specs are sorted by delay.
    """
    if len(specs) == 0:
        raise ValueError("at least one path spec is required")
    specs = sorted(specs, key=lambda s: s.delay)
    delays = np.array([s.delay for s in specs], dtype=float)
    if np.any(np.diff(delays) == 0):
        raise ValueError("path delays must be distinct")

    rng = np.random.default_rng(seed)
    amps = 10.0 ** (np.array([s.avg_power_db for s in specs]) / 20.0)
    draws = (rng.standard_normal(len(specs)) + 1j * rng.standard_normal(len(specs))) / np.sqrt(2)
    rayleigh = np.array([s.gain_mode == "rayleigh" for s in specs])
    gains = np.where(rayleigh, amps * draws, amps + 0j)
    return SparseChannel(delays, gains)


def synth_cfr(channel: SparseChannel, freqs, spacing: float | None = None) -> np.ndarray:
    """Evaluate ``H(f) = sum_k c_k exp(-j 2 pi f tau_k)`` at ``freqs`` (Hz).

    If ``spacing`` (the subcarrier spacing) is given, every delay must lie in
    ``[0, 1/spacing)``.
    """
    freqs = np.asarray(freqs, dtype=float)
    if not np.all(np.isfinite(freqs)):
        raise ValueError("frequencies must be finite")
    if spacing is not None and channel.delays[-1] >= 1.0 / spacing:
        raise ValueError(
            f"delay {channel.delays[-1]:.3e} s outside the unambiguous range 1/f_s = {1.0 / spacing:.3e} s"
        )
    phase = np.multiply.outer(freqs, channel.delays)
    return np.exp(-2j * np.pi * phase) @ channel.gains


def distortion_phase(n_indices, d: DistortionParams, spacing: float) -> np.ndarray:
    """Per-subcarrier phase (rad) ``-2 pi (delta * n * f_s + phi)``."""
    n = np.asarray(n_indices, dtype=float)
    return -2.0 * np.pi * (d.timing_offset * n * spacing + d.phase_offset)


def apply_distortion(samples, n_indices, d: DistortionParams, spacing: float) -> np.ndarray:
    """Rotate band samples by the linear-in-subcarrier distortion phase."""
    samples = np.asarray(samples, dtype=complex)
    n_indices = np.asarray(n_indices)
    if samples.shape != n_indices.shape:
        raise ValueError(f"{samples.size} samples but {n_indices.size} subcarrier indices")
    return samples * np.exp(1j * distortion_phase(n_indices, d, spacing))


def awgn(size: int, noise: NoiseModel) -> np.ndarray:
    """Draw ``size`` noise samples (zeros for the noiseless sentinel)."""
    if noise.is_noiseless:
        return np.zeros(size, dtype=complex)
    rng = np.random.default_rng(noise.seed)
    sigma = np.sqrt(noise.variance / 2.0)
    return sigma * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def add_awgn(samples, noise: NoiseModel) -> np.ndarray:
    samples = np.asarray(samples, dtype=complex)
    if noise.is_noiseless:
        return samples.copy()
    return samples + awgn(samples.size, noise).reshape(samples.shape)


def delay_resolution(total_bw: float) -> tuple[float, float]:
    """Delay resolution ``1/BW`` (s) and the matching path-length difference (m).

    For M spliced bands of N subcarriers pass ``M * N * f_s``.
    """
    if not total_bw > 0:
        raise ValueError(f"bandwidth must be positive, got {total_bw}")
    return 1.0 / total_bw, SPEED_OF_LIGHT / total_bw
