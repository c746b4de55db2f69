"""Time grids, PRBS chip streams and multi-tone test signals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import signal as sps

from .errors import InvalidArgumentError

PRBS15_MASK = 0x7FFF
DEFAULT_PRBS_SEED = 0x7FFF

# Synthetic tone tables (Hz); both stay on the 0.5 MHz grid of a 2 us record.
FOUR_TONE_HZ = (20e6, 45e6, 70e6, 100e6)
FIVE_TONE_HZ = (20e6, 40e6, 60e6, 80e6, 100e6)
MAX_PEAK_PHASE_RAD = 0.2

_ON_GRID_TOL = 1e-6


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    sample_rate: float
    n_samples: int

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def frequency_step(self) -> float:
        """Spacing of the discrete spectrum, 1/duration."""
        return self.sample_rate / self.n_samples

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    def bin_of(self, frequency: float) -> int | None:
        """Return the DFT bin holding ``frequency``, or None when off-grid."""
        k = frequency / self.frequency_step
        kr = round(k)
        if abs(k - kr) > _ON_GRID_TOL:
            return None
        return int(kr)


@dataclass(frozen=True, eq=False)
class Waveform:
    grid: TimeGrid
    samples: np.ndarray
    unit_label: str = "volts"

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 1 or samples.size != self.grid.n_samples:
            raise InvalidArgumentError(
                f"waveform has {samples.size} samples, grid expects {self.grid.n_samples}"
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError("waveform samples must be finite")
        object.__setattr__(self, "samples", samples)

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def with_samples(self, samples: np.ndarray, unit_label: str | None = None) -> Waveform:
        return Waveform(self.grid, samples, self.unit_label if unit_label is None else unit_label)


@dataclass(frozen=True, eq=False)
class ChipSequence:
    chips: np.ndarray
    chip_rate: float
    seed: int

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.int8).copy()
        if not np.all(np.abs(chips) == 1):
            raise InvalidArgumentError("chips must be +1 or -1")
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    def __len__(self) -> int:
        return self.chips.size

    @property
    def duration(self) -> float:
        return self.chips.size / self.chip_rate


@dataclass(frozen=True)
class ToneSpec:
    frequency: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class FilterSpec:
    kind: Literal["brickwall_fft", "windowed_sinc_fir"] = "brickwall_fft"
    cutoff: float = 500e6
    taps: int = 201

    def __post_init__(self):
        if self.kind not in ("brickwall_fft", "windowed_sinc_fir"):
            raise InvalidArgumentError(f"unknown filter kind {self.kind!r}")
        if not self.cutoff > 0:
            raise InvalidArgumentError("filter cutoff must be positive")
        if self.kind == "windowed_sinc_fir" and (self.taps < 3 or self.taps % 2 == 0):
            raise InvalidArgumentError("FIR tap count must be odd and >= 3")


def make_time_grid(sample_rate: float, n_samples: int) -> TimeGrid:
    if not sample_rate > 0:
        raise InvalidArgumentError(f"sample_rate must be positive, got {sample_rate}")
    if int(n_samples) != n_samples or n_samples <= 0:
        raise InvalidArgumentError(f"n_samples must be a positive integer, got {n_samples}")
    return TimeGrid(float(sample_rate), int(n_samples))


def prbs15_bits(seed: int, n_bits: int) -> np.ndarray:
    """Fibonacci LFSR for x^15 + x^14 + 1; emits the feedback bit each shift."""
    state = seed & PRBS15_MASK
    if state == 0:
        raise InvalidArgumentError("PRBS-15 seed must be a nonzero 15-bit value")
    bits = np.empty(n_bits, dtype=np.int8)
    for i in range(n_bits):
        fb = ((state >> 14) ^ (state >> 13)) & 1
        state = ((state << 1) | fb) & PRBS15_MASK
        bits[i] = fb
    return bits


def generate_chip_sequence(
    seed: int = DEFAULT_PRBS_SEED, n_chips: int = 1000, chip_rate: float = 500e6
) -> ChipSequence:
    if n_chips <= 0:
        raise InvalidArgumentError("n_chips must be positive")
    if not chip_rate > 0:
        raise InvalidArgumentError("chip_rate must be positive")
    bits = prbs15_bits(seed, n_chips)
    return ChipSequence(2 * bits - 1, float(chip_rate), int(seed))


def samples_per_chip(grid: TimeGrid, chip_rate: float) -> int:
    ratio = grid.sample_rate / chip_rate
    spc = round(ratio)
    if spc < 1 or abs(ratio - spc) > 1e-9 * ratio:
        raise InvalidArgumentError(
            f"sample rate {grid.sample_rate:g} is not an integer multiple of chip rate {chip_rate:g}"
        )
    return int(spc)


def chips_to_waveform(chips: ChipSequence, grid: TimeGrid, amplitude_volts: float = 1.0) -> Waveform:
    """Non-return-to-zero rendering of ``chips`` on ``grid``."""
    spc = samples_per_chip(grid, chips.chip_rate)
    if spc * len(chips) != grid.n_samples:
        raise InvalidArgumentError(
            f"{len(chips)} chips x {spc} samples/chip does not cover {grid.n_samples} samples"
        )
    samples = amplitude_volts * np.repeat(chips.chips.astype(float), spc)
    return Waveform(grid, samples, "volts")


def _check_cutoff(grid: TimeGrid, spec: FilterSpec) -> None:
    if not 0 < spec.cutoff < grid.nyquist:
        raise InvalidArgumentError(
            f"cutoff {spec.cutoff:g} Hz must lie inside (0, {grid.nyquist:g}) Hz"
        )


def passband_bins(grid: TimeGrid, cutoff: float) -> int:
    """Highest rfft bin index kept by a brickwall at ``cutoff`` (inclusive)."""
    return int(math.floor(cutoff / grid.frequency_step + _ON_GRID_TOL))


def fir_kernel(grid: TimeGrid, spec: FilterSpec) -> np.ndarray:
    """Hamming-windowed sinc taps, normalised to unit DC gain."""
    return sps.firwin(spec.taps, spec.cutoff, fs=grid.sample_rate, window="hamming")


def apply_filter(samples: np.ndarray, grid: TimeGrid, spec: FilterSpec, axis: int = 0) -> np.ndarray:
    """Circular, zero-delay filtering of ``samples`` along ``axis``.

    Works on stacked columns as well, which the sensing-matrix build relies on.
    """
    _check_cutoff(grid, spec)
    n = grid.n_samples
    spectrum = np.fft.rfft(samples, axis=axis)
    if spec.kind == "brickwall_fft":
        kmax = passband_bins(grid, spec.cutoff)
        index = [slice(None)] * spectrum.ndim
        index[axis] = slice(kmax + 1, None)
        spectrum[tuple(index)] = 0.0
    else:
        taps = fir_kernel(grid, spec)
        if taps.size > n:
            raise InvalidArgumentError("FIR longer than the record")
        half = taps.size // 2
        kernel = np.zeros(n)
        kernel[: half + 1] = taps[half:]
        kernel[n - half:] = taps[:half]
        response = np.fft.rfft(kernel)
        shape = [1] * spectrum.ndim
        shape[axis] = response.size
        spectrum *= response.reshape(shape)
    return np.fft.irfft(spectrum, n=n, axis=axis)


def bandlimit(waveform: Waveform, filter_spec: FilterSpec) -> Waveform:
    return waveform.with_samples(apply_filter(waveform.samples, waveform.grid, filter_spec))


def synthesize_multitone(tones: Sequence[ToneSpec], grid: TimeGrid, strict: bool = True) -> Waveform:
    """Sum of cosines, in radians of phase deviation."""
    freqs = [t.frequency for t in tones]
    if len(set(freqs)) != len(freqs):
        raise InvalidArgumentError(f"duplicate tone frequencies in {freqs}")
    t = grid.times()
    samples = np.zeros(grid.n_samples)
    for tone in tones:
        if strict and grid.bin_of(tone.frequency) is None:
            raise InvalidArgumentError(
                f"tone at {tone.frequency:g} Hz is off the {grid.frequency_step:g} Hz grid"
            )
        samples += tone.amplitude * np.cos(2 * np.pi * tone.frequency * t + tone.phase)
    return Waveform(grid, samples, "radians")


def default_tones(frequencies: Sequence[float], peak_phase: float = MAX_PEAK_PHASE_RAD) -> list[ToneSpec]:
    """Equal-amplitude, zero-phase tones whose amplitudes sum to ``peak_phase``."""
    if not frequencies:
        return []
    amp = peak_phase / len(frequencies)
    return [ToneSpec(float(f), amp, 0.0) for f in frequencies]
