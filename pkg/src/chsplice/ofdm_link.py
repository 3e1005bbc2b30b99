"""OFDM numerology, pilot symbols and least-squares channel estimation.

DFT convention: subcarrier samples are stored in centred order
``n = -(N-1)/2 .. (N-1)/2`` and

    H[n] = sum_l h[l] exp(-j 2 pi n l / N)          (cir_to_cfr)
    h[l] = (1/N) sum_n H[n] exp(+j 2 pi n l / N)     (cfr_to_cir)

so that ``sum |h|^2 == mean |H|^2`` (Parseval) and a unit pilot grid maps to
a unit impulse in time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import toeplitz

from .channel_model import NoiseModel, SparseChannel, add_awgn, awgn, synth_cfr

WIFI_SUBCARRIER_SPACING = 312.5e3  # Hz

RANK_CUTOFF = 1e-12
PILOT_FLOOR = 1e-12


def _integral_ratio(num: float, den: float, what: str) -> int:
    ratio = num / den
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"{what}: {num:g} is not an integer multiple of {den:g}")
    return k


@dataclass(frozen=True)
class BandPlan:
    """M contiguous sub-bands of N (odd) subcarriers spaced ``spacing`` Hz."""

    centers: tuple[float, ...]
    num_subcarriers: int
    spacing: float = WIFI_SUBCARRIER_SPACING

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if len(self.centers) == 0:
            raise ValueError("band plan needs at least one band")
        if self.num_subcarriers < 1 or self.num_subcarriers % 2 == 0:
            raise ValueError(f"N must be a positive odd integer, got {self.num_subcarriers}")
        if not self.spacing > 0:
            raise ValueError("subcarrier spacing must be positive")
        if any(b <= a for a, b in zip(self.centers, self.centers[1:])):
            raise ValueError("band centres must be strictly increasing")

    @property
    def num_bands(self) -> int:
        return len(self.centers)

    @property
    def subcarrier_indices(self) -> np.ndarray:
        half = (self.num_subcarriers - 1) // 2
        return np.arange(-half, half + 1)

    @property
    def band_bw(self) -> float:
        """Occupied bandwidth of one band, ``N * f_s``."""
        return self.num_subcarriers * self.spacing


def build_band_plan(total_bw: float, sub_bw: float, overall_center: float,
                    spacing: float = WIFI_SUBCARRIER_SPACING) -> BandPlan:
    """Split ``total_bw`` into contiguous ``sub_bw`` bands centred on ``overall_center``.

    N is the largest odd integer not above ``sub_bw / spacing`` (no guard tones).
    """
    num_bands = _integral_ratio(total_bw, sub_bw, "total bandwidth")
    tones = _integral_ratio(sub_bw, spacing, "sub-band bandwidth")
    n = tones if tones % 2 else tones - 1
    if n < 1:
        raise ValueError("sub-band too narrow for a single subcarrier")
    offsets = (np.arange(num_bands) - (num_bands - 1) / 2.0) * sub_bw
    return BandPlan(tuple(overall_center + offsets), n, spacing)


def subcarrier_freqs(plan: BandPlan, m: int) -> np.ndarray:
    """``f_{m,n} = f_{m,0} + n f_s`` for n in the centred index set."""
    if not 0 <= m < plan.num_bands:
        raise IndexError(f"band {m} out of range for {plan.num_bands} bands")
    return plan.centers[m] + plan.subcarrier_indices * plan.spacing


@dataclass(frozen=True, eq=False)
class PilotGrid:
    """Unit-modulus pilot symbols of one band, centred subcarrier order."""

    band: int
    symbols: np.ndarray

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=complex).reshape(-1)
        if not np.allclose(np.abs(symbols), 1.0, rtol=0, atol=1e-12):
            raise ValueError("pilot symbols must have unit modulus")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def ones(cls, band: int, n: int) -> "PilotGrid":
        return cls(band, np.ones(n, dtype=complex))

    @classmethod
    def random_bpsk(cls, band: int, n: int, seed: int = 0) -> "PilotGrid":
        rng = np.random.default_rng(seed)
        return cls(band, rng.choice([-1.0, 1.0], size=n).astype(complex))


@dataclass(frozen=True, eq=False)
class CfrMeasurement:
    """Complex CFR samples of one band at its subcarrier frequencies."""

    band: int
    freqs: np.ndarray
    samples: np.ndarray
    flags: frozenset = field(default_factory=lambda: frozenset({"clean"}))

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float).reshape(-1)
        samples = np.asarray(self.samples, dtype=complex).reshape(-1)
        if freqs.shape != samples.shape:
            raise ValueError(f"{freqs.size} frequencies but {samples.size} samples")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "flags", frozenset(self.flags))


@dataclass(frozen=True, eq=False)
class TimeDomainFrame:
    """Baseband samples at rate ``N f_s``: cyclic prefix followed by N useful samples."""

    samples: np.ndarray
    cp_len: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).reshape(-1)
        object.__setattr__(self, "samples", samples)
        if not 0 <= self.cp_len <= samples.size:
            raise ValueError("cyclic prefix length out of range")

    @property
    def useful(self) -> np.ndarray:
        return self.samples[self.cp_len:]


def cir_to_cfr(taps, n: int | None = None) -> np.ndarray:
    """N-point DFT of CIR taps, returned in centred subcarrier order.

    ``n`` zero-pads the taps (``n >= len(taps)``); N must be odd for the
    centred index set to be symmetric, but even sizes are accepted.
    """
    taps = np.asarray(taps, dtype=complex)
    if taps.size == 0:
        raise ValueError("empty tap vector")
    return np.fft.fftshift(np.fft.fft(taps, n=n))


def cfr_to_cir(samples) -> np.ndarray:
    """Inverse of :func:`cir_to_cfr`."""
    samples = np.asarray(samples, dtype=complex)
    if samples.size == 0:
        raise ValueError("empty CFR vector")
    return np.fft.ifft(np.fft.ifftshift(samples))


def make_pilot_frame(plan: BandPlan, m: int, grid: PilotGrid | None = None,
                     cp_len: int = 16) -> TimeDomainFrame:
    """One OFDM pilot symbol of band ``m`` with a cyclic prefix."""
    n = plan.num_subcarriers
    if not 0 <= m < plan.num_bands:
        raise IndexError(f"band {m} out of range")
    if grid is None:
        grid = PilotGrid.ones(m, n)
    if grid.band != m or grid.symbols.size != n:
        raise ValueError("pilot grid does not match the requested band")
    if not 0 <= cp_len <= n:
        raise ValueError(f"cyclic prefix length must lie in [0, {n}], got {cp_len}")
    useful = cfr_to_cir(grid.symbols)
    return TimeDomainFrame(np.concatenate([useful[n - cp_len:], useful]), cp_len)


def sparse_to_taps(channel: SparseChannel, sample_rate: float, carrier: float = 0.0,
                   length: int | None = None) -> np.ndarray:
    """Discrete baseband taps: delays rounded to the nearest sample.

    Each tap carries the carrier phase ``exp(-j 2 pi carrier tau_k)`` so the
    sampled CFR matches :func:`~chsplice.channel_model.synth_cfr` at the
    absolute subcarrier frequencies when delays fall on the sample grid.
    """
    idx = np.rint(channel.delays * sample_rate).astype(int)
    size = int(idx.max()) + 1 if length is None else length
    if idx.max() >= size:
        raise ValueError(f"channel spans {idx.max() + 1} taps, more than {size}")
    taps = np.zeros(size, dtype=complex)
    np.add.at(taps, idx, channel.gains * np.exp(-2j * np.pi * carrier * channel.delays))
    return taps


def propagate_time(frame: TimeDomainFrame, taps, noise: NoiseModel | None = None) -> TimeDomainFrame:
    """Linear convolution with ``taps``, truncated to the frame, plus AWGN."""
    taps = np.asarray(taps, dtype=complex)
    if taps.size > frame.cp_len + 1:
        raise ValueError(
            f"channel of {taps.size} taps is longer than the cyclic prefix allows ({frame.cp_len + 1})"
        )
    rx = np.convolve(frame.samples, taps)[: frame.samples.size]
    if noise is not None:
        rx = rx + awgn(rx.size, noise)
    return TimeDomainFrame(rx, frame.cp_len)


def frame_to_cfr(rx: TimeDomainFrame, plan: BandPlan, m: int) -> CfrMeasurement:
    """Drop the cyclic prefix and return the received subcarrier samples Y."""
    if rx.useful.size != plan.num_subcarriers:
        raise ValueError("frame length does not match the band plan")
    return CfrMeasurement(m, subcarrier_freqs(plan, m), cir_to_cfr(rx.useful))


def ls_estimate_time(rx: TimeDomainFrame, tx: TimeDomainFrame, length: int | None = None) -> np.ndarray:
    """Time-domain LS: ``h = pinv(X) y`` with X the Toeplitz matrix of ``tx``.

    Samples before the frame are taken as zero, matching
    :func:`propagate_time`. ``length`` defaults to ``cp_len + 1``.
    """
    if length is None:
        length = tx.cp_len + 1
    x, y = tx.samples, rx.samples
    if x.size != y.size:
        raise ValueError("received and transmitted frames differ in length")
    if not 1 <= length <= x.size:
        raise ValueError(f"channel length {length} out of range")
    first_row = np.zeros(length, dtype=complex)
    first_row[0] = x[0]
    X = toeplitz(x, first_row)
    u, s, vh = np.linalg.svd(X, full_matrices=False)
    if s[-1] <= RANK_CUTOFF * s[0]:
        raise np.linalg.LinAlgError(
            f"pilot Toeplitz matrix is rank deficient (singular values {s[-1]:.2e} .. {s[0]:.2e})"
        )
    return vh.conj().T @ ((u.conj().T @ y) / s)


def ls_estimate_freq(rx_grid: CfrMeasurement, pilots: PilotGrid) -> CfrMeasurement:
    """Frequency-domain LS: element-wise ``Y / X``."""
    if rx_grid.band != pilots.band or rx_grid.samples.size != pilots.symbols.size:
        raise ValueError("received grid and pilots do not describe the same band")
    if np.any(np.abs(pilots.symbols) < PILOT_FLOOR):
        raise ZeroDivisionError("pilot symbol magnitude below floor")
    return CfrMeasurement(rx_grid.band, rx_grid.freqs, rx_grid.samples / pilots.symbols,
                          rx_grid.flags)


def measure_band(channel: SparseChannel, plan: BandPlan, m: int,
                 noise: NoiseModel | None = None) -> CfrMeasurement:
    """Noisy unit-pilot CFR of band ``m`` synthesised in the frequency domain."""
    freqs = subcarrier_freqs(plan, m)
    samples = synth_cfr(channel, freqs, spacing=plan.spacing)
    if noise is None or noise.is_noiseless:
        return CfrMeasurement(m, freqs, samples)
    return CfrMeasurement(m, freqs, add_awgn(samples, noise), {"noisy"})


def measure_plan(channel: SparseChannel, plan: BandPlan,
                 noise: NoiseModel | None = None,
                 bands: Sequence[int] | None = None) -> list[CfrMeasurement]:
    """CFR measurements for ``bands`` (default all) of a plan.

    Noise is drawn once for the whole plan from ``noise.seed``, so a band's
    noise realisation does not depend on which other bands are kept.
    """
    n = plan.num_subcarriers
    freqs = np.concatenate([subcarrier_freqs(plan, m) for m in range(plan.num_bands)])
    clean = synth_cfr(channel, freqs, spacing=plan.spacing)
    noisy = noise is not None and not noise.is_noiseless
    samples = clean + awgn(clean.size, noise) if noisy else clean
    flags = {"noisy"} if noisy else {"clean"}
    bands = range(plan.num_bands) if bands is None else bands
    return [CfrMeasurement(m, freqs[m * n:(m + 1) * n], samples[m * n:(m + 1) * n], flags)
            for m in bands]
