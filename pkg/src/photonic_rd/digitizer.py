"""Receiver-side digital low-pass filtering and fixed-stride decimation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .waveforms import FilterSpec, Waveform, apply_filter

RECEIVER_LPF = FilterSpec("brickwall_fft", 25e6)


@dataclass(frozen=True)
class DecimationPlan:
    """Keep every ``factor``-th sample starting at intra-chip ``position`` (1-based).

    ``n_output`` of None takes every index that fits in the record.
    """

    factor: int = 200
    position: int = 1
    n_output: int | None = 100

    def __post_init__(self):
        if self.factor < 1:
            raise InvalidArgumentError("decimation factor must be >= 1")
        if self.position < 1:
            raise InvalidArgumentError("position is 1-based and must be >= 1")
        if self.n_output is not None and self.n_output < 1:
            raise InvalidArgumentError("n_output must be >= 1")

    @property
    def offset_samples(self) -> int:
        return self.position - 1

    def output_length(self, n_input: int) -> int:
        if self.n_output is not None:
            return self.n_output
        return max(0, -(-(n_input - self.offset_samples) // self.factor))

    def indices(self, n_input: int) -> np.ndarray:
        m = self.output_length(n_input)
        last = self.offset_samples + (m - 1) * self.factor
        if m < 1 or last >= n_input:
            raise InvalidArgumentError(
                f"plan needs sample {last} but the record has {n_input} samples"
            )
        return self.offset_samples + self.factor * np.arange(m)


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    values: np.ndarray
    equivalent_rate: float

    def __len__(self) -> int:
        return self.values.size


def lowpass(waveform: Waveform, filter_spec: FilterSpec = RECEIVER_LPF) -> Waveform:
    return waveform.with_samples(apply_filter(waveform.samples, waveform.grid, filter_spec))


def decimate(waveform: Waveform, plan: DecimationPlan) -> MeasurementVector:
    idx = plan.indices(waveform.grid.n_samples)
    values = waveform.samples[idx].copy()
    values.setflags(write=False)
    return MeasurementVector(values, waveform.grid.sample_rate / plan.factor)


def decimate_rows(samples: np.ndarray, plan: DecimationPlan) -> np.ndarray:
    """Row-wise decimation of a stacked (n_samples, ...) array."""
    return samples[plan.indices(samples.shape[0])]
