"""Dual-drive MZM intensity response and AC-coupled photodetection.

The PRBS drive is given in volts and scaled by pi/v_pi; the signal drive is
already a phase in radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .waveforms import Waveform


@dataclass(frozen=True)
class ModulatorParams:
    v_pi: float = 1.0
    v_code: float = 0.5
    v_dc: float | None = None  # None biases at v_pi (minimum transmission)

    def __post_init__(self):
        if not self.v_pi > 0:
            raise InvalidArgumentError("v_pi must be positive")
        if not self.v_code > 0:
            raise InvalidArgumentError("v_code must be positive")
        if self.v_dc is None:
            object.__setattr__(self, "v_dc", self.v_pi)

    @property
    def alpha(self) -> float:
        """Chip phase pi * v_code / v_pi."""
        return math.pi * self.v_code / self.v_pi

    @property
    def mixing_gain(self) -> float:
        """Coefficient of the chip x signal product, sin(alpha)/2."""
        return 0.5 * math.sin(self.alpha)

    @property
    def harmonic_gain(self) -> float:
        """Coefficient of the squared-signal term, cos(alpha)/4."""
        return 0.25 * math.cos(self.alpha)


@dataclass(frozen=True)
class PdParams:
    gain: float = 1.0
    ac_coupled: bool = True

    def __post_init__(self):
        if not self.gain > 0:
            raise InvalidArgumentError("photodetector gain must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    c_thermal: float = 0.0
    c_shot: float = 0.0
    c_rin: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("c_thermal", "c_shot", "c_rin"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidArgumentError(f"{name} must be a finite value >= 0, got {value}")

    @property
    def enabled(self) -> bool:
        return self.c_thermal > 0 or self.c_shot > 0 or self.c_rin > 0

    def variance(self, mean_intensity: float) -> float:
        return self.c_thermal + self.c_shot * mean_intensity + self.c_rin * mean_intensity**2


def _same_grid(a: Waveform, b: Waveform) -> None:
    if a.grid != b.grid:
        raise InvalidArgumentError(f"grid mismatch: {a.grid} vs {b.grid}")


def mzm_output(prbs_drive: Waveform, signal_drive: Waveform, params: ModulatorParams) -> Waveform:
    """Exact raised-cosine transfer, normalised to [0, 1]."""
    _same_grid(prbs_drive, signal_drive)
    phase = math.pi * (params.v_dc + prbs_drive.samples) / params.v_pi + signal_drive.samples
    out = 0.5 + 0.5 * np.cos(phase)
    return prbs_drive.with_samples(np.clip(out, 0.0, 1.0), "normalized intensity")


def small_signal_terms(
    chip_wave: Waveform, signal_drive: Waveform, params: ModulatorParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the (mixed, second-harmonic, signal-independent) terms per sample.

    ``chip_wave`` holds the normalised code s(t); exact chips are +-1, while a
    bandlimited code lets the effective amplitude vary over time, which is why
    sin/cos are taken of alpha * s rather than factored out.
    """
    _same_grid(chip_wave, signal_drive)
    phi = params.alpha * chip_wave.samples
    x = signal_drive.samples
    mixed = 0.5 * np.sin(phi) * x
    harmonic = 0.25 * np.cos(phi) * x**2
    independent = 0.5 - 0.5 * np.cos(phi)
    return mixed, harmonic, independent


def mzm_small_signal(chip_wave: Waveform, signal_drive: Waveform, params: ModulatorParams) -> Waveform:
    """Second-order expansion of :func:`mzm_output` about the biased chip phase.

    Valid for bias at v_pi and |signal| well below 1 rad.
    """
    mixed, harmonic, independent = small_signal_terms(chip_wave, signal_drive, params)
    return chip_wave.with_samples(mixed + harmonic + independent, "normalized intensity")


def photodetect(
    optical: Waveform,
    pd: PdParams = PdParams(),
    noise: NoiseSpec = NoiseSpec(),
    rng: np.random.Generator | None = None,
) -> Waveform:
    """Square-law detection with record-mean AC coupling and stationary noise.

    ``rng`` overrides the generator seeded from ``noise.seed``.
    """
    samples = optical.samples
    if samples.min() < -1e-12 or samples.max() > 1 + 1e-12:
        raise InvalidArgumentError("optical intensity must lie in [0, 1]")
    mean = float(samples.mean())
    out = pd.gain * (samples - mean) if pd.ac_coupled else pd.gain * samples
    if noise.enabled:
        if rng is None:
            rng = np.random.default_rng(noise.seed)
        sigma = math.sqrt(noise.variance(mean))
        out = out + rng.normal(0.0, sigma, size=out.size)
    return optical.with_samples(out, "volts")
