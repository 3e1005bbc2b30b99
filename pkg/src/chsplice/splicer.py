"""Multi-band splicing: stack per-band CFRs and recover a sparse CIR with OMP."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ofdm_link import BandPlan, CfrMeasurement, subcarrier_freqs

MAX_CONDITION = 1e12
# Residuals below this fraction of ||y|| are numerical zero; iterating further
# only fits round-off.
_ZERO_RESIDUAL = 1e-13


@dataclass(frozen=True, eq=False)
class StackedMeasurement:
    """Band-major concatenation of the CFR samples that were measured."""

    freqs: np.ndarray
    samples: np.ndarray
    bands: tuple[int, ...]
    boundaries: tuple[tuple[int, int], ...]
    spacing: float

    def __len__(self):
        return self.samples.size

    def scaled(self, alpha: complex) -> "StackedMeasurement":
        return StackedMeasurement(self.freqs, alpha * self.samples, self.bands,
                                  self.boundaries, self.spacing)


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unit-norm delay atoms over a stacked frequency vector.

    Column ``i`` is ``exp(-j 2 pi f (i/G) / f_s) / sqrt(len(f))``, i.e. the
    normalised CFR of a unit path at grid delay ``i / (G f_s)``.
    """

    atoms: np.ndarray
    grid_delays: np.ndarray
    spacing: float

    @property
    def size(self) -> int:
        return self.atoms.shape[1]

    @property
    def delay_step(self) -> float:
        return 1.0 / (self.size * self.spacing)


@dataclass
class SpliceResult:
    support: list[int]
    coefficients: np.ndarray
    residual_norms: list[float]
    delays: np.ndarray = field(default_factory=lambda: np.zeros(0))
    measurement_len: int = 1

    @property
    def path_gains(self) -> np.ndarray:
        """Coefficients rescaled to channel gains (undoing atom normalisation)."""
        return self.coefficients / np.sqrt(self.measurement_len)


class IllConditionedError(np.linalg.LinAlgError):
    """OMP's least-squares subproblem became ill conditioned.

    The partial result up to (not including) the offending atom is attached.
    """

    def __init__(self, msg: str, partial: SpliceResult):
        super().__init__(msg)
        self.partial = partial


def stack_measurements(measurements: Sequence[CfrMeasurement], plan: BandPlan) -> StackedMeasurement:
    """Concatenate a subset of the plan's bands in ascending band order.

    Frequencies are recomputed from the plan and checked against each
    measurement's own frequency vector.
    """
    if len(measurements) == 0:
        raise ValueError("nothing to stack")
    by_band: dict[int, CfrMeasurement] = {}
    for meas in measurements:
        if meas.band in by_band:
            raise ValueError(f"band {meas.band} given twice")
        by_band[meas.band] = meas

    n = plan.num_subcarriers
    freqs, samples, bounds = [], [], []
    for pos, m in enumerate(sorted(by_band)):
        meas = by_band[m]
        expected = subcarrier_freqs(plan, m)
        if meas.samples.size != n:
            raise ValueError(f"band {m}: {meas.samples.size} samples, plan has N={n}")
        if not np.allclose(meas.freqs, expected, rtol=0, atol=1e-6 * plan.spacing):
            raise ValueError(f"band {m}: subcarrier frequencies do not match the band plan")
        freqs.append(expected)
        samples.append(meas.samples)
        bounds.append((pos * n, (pos + 1) * n))
    return StackedMeasurement(np.concatenate(freqs), np.concatenate(samples),
                              tuple(sorted(by_band)), tuple(bounds), plan.spacing)


def build_dictionary(freqs, spacing: float, grid_factor: int = 3) -> Dictionary:
    """Delay-grid dictionary with ``G = grid_factor * len(freqs)`` atoms on ``[0, 1/f_s)``."""
    freqs = np.asarray(freqs, dtype=float).reshape(-1)
    if freqs.size == 0:
        raise ValueError("empty frequency vector")
    if grid_factor < 1:
        raise ValueError(f"grid_factor must be a positive integer, got {grid_factor}")
    if grid_factor < 2:
        warnings.warn("grid_factor < 2: delay grid is not dense", stacklevel=2)
    size = grid_factor * freqs.size
    grid = np.arange(size) / size
    phase = np.mod(np.multiply.outer(freqs / spacing, grid), 1.0)
    atoms = np.exp(-2j * np.pi * phase) / np.sqrt(freqs.size)
    return Dictionary(atoms, grid / spacing, spacing)


def dictionary_for(stacked: StackedMeasurement, grid_factor: int = 3) -> Dictionary:
    return build_dictionary(stacked.freqs, stacked.spacing, grid_factor)


def omp(stacked: StackedMeasurement | np.ndarray, dictionary: Dictionary, sparsity: int,
        tol: float = 1e-6) -> SpliceResult:
    """Orthogonal matching pursuit.

    Each iteration adds the unselected atom with the largest
    ``|<d_i, residual>|`` (lowest index on ties) and refits all selected
    coefficients by least squares. Stops after ``sparsity`` atoms or once
    ``||residual|| <= tol * ||y||``.
    """
    y = stacked.samples if isinstance(stacked, StackedMeasurement) else np.asarray(stacked, dtype=complex)
    D = dictionary.atoms
    if y.size != D.shape[0]:
        raise ValueError(f"measurement length {y.size} does not match dictionary rows {D.shape[0]}")
    if not 1 <= sparsity <= D.shape[1]:
        raise ValueError(f"sparsity must lie in [1, {D.shape[1]}], got {sparsity}")

    y_norm = np.linalg.norm(y)
    stop = max(tol, _ZERO_RESIDUAL) * y_norm
    residual = y.copy()
    norms = [float(y_norm)]
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    DH = D.conj().T

    def result():
        return SpliceResult(list(support), coef.copy(), list(norms),
                            dictionary.grid_delays[support], y.size)

    while len(support) < sparsity and norms[-1] > stop:
        corr = np.abs(DH @ residual)
        corr[support] = -np.inf
        idx = int(np.argmax(corr))
        sub = D[:, support + [idx]]
        cond = np.linalg.cond(sub)
        if cond > MAX_CONDITION:
            raise IllConditionedError(
                f"atom {idx} makes the LS system ill conditioned (cond={cond:.2e})", result())
        support.append(idx)
        coef = np.linalg.lstsq(sub, y, rcond=None)[0]
        residual = y - sub @ coef
        norms.append(float(np.linalg.norm(residual)))
    return result()


def support_to_delays(result: SpliceResult, dictionary: Dictionary) -> list[tuple[float, complex]]:
    """``(delay, coefficient)`` pairs sorted by delay; delay = index / (G f_s)."""
    pairs = [(float(dictionary.grid_delays[i]), complex(c))
             for i, c in zip(result.support, result.coefficients)]
    return sorted(pairs, key=lambda p: p[0])


def path_estimates(result: SpliceResult, dictionary: Dictionary) -> list[tuple[float, complex]]:
    """Like :func:`support_to_delays` but with coefficients rescaled to path gains."""
    scale = 1.0 / float(np.sqrt(result.measurement_len))
    return [(d, complex(c * scale)) for d, c in support_to_delays(result, dictionary)]


def splice(measurements: Sequence[CfrMeasurement], plan: BandPlan, sparsity: int,
           grid_factor: int = 3, tol: float = 0.0) -> SpliceResult:
    """Stack, build the dictionary and run OMP in one call."""
    stacked = stack_measurements(measurements, plan)
    return omp(stacked, dictionary_for(stacked, grid_factor), sparsity, tol)
