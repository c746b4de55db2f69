"""Fourier dictionary, random-demodulator sensing matrix and OMP recovery."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .digitizer import RECEIVER_LPF, DecimationPlan, MeasurementVector, decimate_rows
from .errors import InvalidArgumentError
from .photonic import ModulatorParams, PdParams
from .waveforms import FilterSpec, TimeGrid, Waveform, apply_filter

log = logging.getLogger(__name__)

_BANK_CHUNK = 128


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unit-norm sampled sinusoids.

    Column 0 is DC; columns 2k-1 and 2k are cos and sin at k * grid.frequency_step.
    """

    grid: TimeGrid
    atoms: np.ndarray
    f_max_dict: float

    @property
    def size(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_freqs(self) -> int:
        return (self.size - 1) // 2 + 1

    def frequencies(self) -> np.ndarray:
        """Frequency grid (Hz) of the distinct atom pairs, DC first."""
        return np.arange(self.n_freqs) * self.grid.frequency_step

    def atom_bin(self, j: int) -> int:
        return (j + 1) // 2

    def project(self, x: Waveform) -> np.ndarray:
        return self.atoms.T @ x.samples

    def synthesize(self, coefficients: np.ndarray) -> np.ndarray:
        return self.atoms @ coefficients

    def amplitude_spectrum(self, coefficients: np.ndarray) -> np.ndarray:
        """Per-frequency tone amplitude implied by full-length ``coefficients``."""
        n = self.grid.n_samples
        spec = np.empty(self.n_freqs)
        spec[0] = abs(coefficients[0]) / math.sqrt(n)
        pairs = coefficients[1:].reshape(-1, 2)
        spec[1:] = np.hypot(pairs[:, 0], pairs[:, 1]) * math.sqrt(2.0 / n)
        return spec


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    entries: np.ndarray
    gain_model: float
    plan: DecimationPlan
    assumed_chips: Waveform

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def unit_gain_entries(self) -> np.ndarray:
        return self.entries / self.gain_model


@dataclass
class SparseSolution:
    support: list[int] = field(default_factory=list)
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual_norms: list[float] = field(default_factory=list)
    iterations: int = 0

    def dense(self, n_atoms: int) -> np.ndarray:
        out = np.zeros(n_atoms)
        out[self.support] = self.coefficients
        return out


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    x_rec: Waveform
    error: float
    solution: SparseSolution


def build_dictionary(grid: TimeGrid, f_max_dict: float = 250e6) -> Dictionary:
    k_max = grid.bin_of(f_max_dict)
    if k_max is None or k_max < 0:
        raise InvalidArgumentError(
            f"dictionary ceiling {f_max_dict:g} Hz is off the {grid.frequency_step:g} Hz grid"
        )
    n = grid.n_samples
    if 2 * k_max >= n:
        raise InvalidArgumentError("dictionary ceiling must stay below Nyquist")
    i = np.arange(n)
    atoms = np.empty((n, 1 + 2 * k_max))
    atoms[:, 0] = 1.0 / math.sqrt(n)
    scale = math.sqrt(2.0 / n)
    for k in range(1, k_max + 1):
        # integer phase index keeps long records exact
        theta = 2 * np.pi * ((k * i) % n) / n
        atoms[:, 2 * k - 1] = scale * np.cos(theta)
        atoms[:, 2 * k] = scale * np.sin(theta)
    atoms.setflags(write=False)
    return Dictionary(grid, atoms, float(f_max_dict))


def mixed_atom_bank(
    dictionary: Dictionary,
    chips: Waveform,
    lpf_spec: FilterSpec = RECEIVER_LPF,
    ac_coupled: bool = True,
) -> np.ndarray:
    """Full-rate low-passed ``chips * atom`` for every atom, gain excluded.

    With AC coupling the record mean of each product is removed first, as the
    photodetector does to the real measurement.
    """
    if chips.grid != dictionary.grid:
        raise InvalidArgumentError("chip waveform and dictionary use different grids")
    s = chips.samples[:, None]
    bank = np.empty(dictionary.atoms.shape)
    for start in range(0, dictionary.size, _BANK_CHUNK):
        cols = slice(start, start + _BANK_CHUNK)
        mixed = s * dictionary.atoms[:, cols]
        if ac_coupled:
            mixed = mixed - mixed.mean(axis=0)
        bank[:, cols] = apply_filter(mixed, dictionary.grid, lpf_spec, axis=0)
    return bank


def sensing_gain(modulator: ModulatorParams, pd: PdParams, assume_unit_gain: bool = False) -> float:
    if assume_unit_gain:
        return 0.5 * pd.gain
    return modulator.mixing_gain * pd.gain


def build_sensing_matrix(
    dictionary: Dictionary,
    modulator_params: ModulatorParams,
    pd_params: PdParams,
    chips: Waveform,
    lpf_spec: FilterSpec = RECEIVER_LPF,
    plan: DecimationPlan = DecimationPlan(),
    *,
    bank: np.ndarray | None = None,
    assume_unit_gain: bool = False,
) -> SensingMatrix:
    """Measurement operator for ideal NRZ ``chips`` (unit amplitude, +-1).

    ``bank`` may carry a precomputed :func:`mixed_atom_bank` so that sweeps over
    amplitude and position pay for the full-rate filtering once.
    """
    if chips.grid != dictionary.grid:
        raise InvalidArgumentError("chip waveform and dictionary use different grids")
    if not np.all(np.abs(chips.samples) == 1.0):
        raise InvalidArgumentError("sensing matrix expects ideal +-1 chips")
    if bank is None:
        bank = mixed_atom_bank(dictionary, chips, lpf_spec, pd_params.ac_coupled)
    elif bank.shape != dictionary.atoms.shape:
        raise InvalidArgumentError(f"bank shape {bank.shape} does not match dictionary")
    g = sensing_gain(modulator_params, pd_params, assume_unit_gain)
    entries = g * decimate_rows(bank, plan)
    entries.setflags(write=False)
    return SensingMatrix(entries, g, plan, chips)


def omp(
    A: SensingMatrix | np.ndarray,
    y: MeasurementVector | np.ndarray,
    sparsity_budget: int,
    residual_tol: float = 1e-6,
) -> SparseSolution:
    """Orthogonal matching pursuit.

    Atoms are ranked by |<a_j, r>| / ||a_j||; exact ties go to the lowest index.
    A support that turns rank-deficient drops its newest atom and stops.
    """
    mat = A.entries if isinstance(A, SensingMatrix) else np.asarray(A, dtype=float)
    vec = y.values if isinstance(y, MeasurementVector) else np.asarray(y, dtype=float)
    m, n = mat.shape
    if vec.shape != (m,):
        raise InvalidArgumentError(f"measurement length {vec.shape} does not match matrix rows {m}")
    if not 0 <= sparsity_budget <= m:
        raise InvalidArgumentError(f"sparsity budget {sparsity_budget} outside [0, {m}]")

    y_norm = float(np.linalg.norm(vec))
    solution = SparseSolution()
    if y_norm == 0.0 or sparsity_budget == 0:
        return solution

    norms = np.linalg.norm(mat, axis=0)
    usable = norms > 0
    if not usable.all():
        warnings.warn(f"skipping {int((~usable).sum())} zero columns in OMP", RuntimeWarning, stacklevel=2)
    inv_norms = np.where(usable, 1.0 / np.where(usable, norms, 1.0), 0.0)

    residual = vec.copy()
    support: list[int] = []
    coef = np.zeros(0)
    while len(support) < sparsity_budget:
        scores = np.abs(mat.T @ residual) * inv_norms
        scores[~usable] = -1.0
        scores[support] = -1.0
        j = int(np.argmax(scores))
        if scores[j] <= 0:
            break
        trial = support + [j]
        sub = mat[:, trial]
        new_coef, _, rank, _ = np.linalg.lstsq(sub, vec, rcond=None)
        if rank < len(trial):
            log.debug("OMP support became rank deficient at atom %d; stopping", j)
            break
        support, coef = trial, new_coef
        residual = vec - sub @ coef
        r_norm = float(np.linalg.norm(residual))
        solution.residual_norms.append(r_norm)
        if r_norm <= residual_tol * y_norm:
            break

    solution.support = support
    solution.coefficients = coef
    solution.iterations = len(solution.residual_norms)
    return solution


def reconstruct_signal(solution: SparseSolution, dictionary: Dictionary, gain_model: float = 1.0) -> Waveform:
    """Synthesize the full-rate estimate from the recovered atoms.

    ``gain_model`` is whatever gain the matrix the solution came from left
    uncompensated; use 1 when the matrix already includes it.
    """
    if any(j < 0 or j >= dictionary.size for j in solution.support):
        raise InvalidArgumentError("solution references atoms outside the dictionary")
    if solution.support:
        x = dictionary.atoms[:, solution.support] @ solution.coefficients / gain_model
    else:
        x = np.zeros(dictionary.grid.n_samples)
    return Waveform(dictionary.grid, x, "radians")


def reconstruction_error(x_rec: Waveform, x_true: Waveform) -> float:
    """Normalised squared error ||x' - x||^2 / ||x||^2."""
    if x_rec.grid != x_true.grid:
        raise InvalidArgumentError("reconstruction and reference use different grids")
    ref = x_true.energy()
    if ref == 0.0:
        raise InvalidArgumentError("reference signal has zero energy")
    diff = x_rec.samples - x_true.samples
    return float(np.dot(diff, diff) / ref)


def mutual_coherence(mat: np.ndarray) -> float:
    cols = mat / np.linalg.norm(mat, axis=0)
    gram = np.abs(cols.T @ cols)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())
