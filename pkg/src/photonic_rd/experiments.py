"""Single trials, amplitude x position sweeps, term diagnostics and reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .config import TrialConfig
from .digitizer import decimate, lowpass
from .photonic import ModulatorParams, mzm_output, mzm_small_signal, photodetect, small_signal_terms
from .reconstruction import (
    Dictionary,
    build_dictionary,
    build_sensing_matrix,
    mixed_atom_bank,
    omp,
    reconstruct_signal,
    reconstruction_error,
)
from .waveforms import (
    ChipSequence,
    FilterSpec,
    TimeGrid,
    Waveform,
    bandlimit,
    chips_to_waveform,
    generate_chip_sequence,
    synthesize_multitone,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Measured values from the hardware testbed, kept for side-by-side display only.
HARDWARE_REFERENCE = {
    "max_error_reduction": 0.85,
    "four_tone_bw500mhz_position16": {"amplitude_0.5": 0.519, "amplitude_0.243": 0.175},
    "five_tone_bw500mhz_position16": {"amplitude_0.5": 0.498, "amplitude_0.243": 0.03},
    "four_tone_bw1ghz_mean": {"sweep_start": 0.322, "sweep_end": 0.048},
    "five_tone_bw1ghz_mean": {"sweep_start": 0.342, "sweep_end": 0.052},
}


@dataclass
class TrialRecord:
    fingerprint: str
    amplitude_ratio: float
    position: int
    error: float
    support: list[int]
    coefficients: list[float]
    spectra: dict[str, list[float]]
    runtime_s: float
    config: dict[str, Any]
    status: str = "ok"
    reason: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "config_fingerprint": self.fingerprint,
            "amplitude_ratio": self.amplitude_ratio,
            "position": self.position,
            "status": self.status,
            "reason": self.reason,
            "error": None if not math.isfinite(self.error) else self.error,
            "support": self.support,
            "coefficients": self.coefficients,
            "spectra": self.spectra,
            "runtime_s": self.runtime_s,
            "config": self.config,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> TrialRecord:
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"record schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
        err = data.get("error")
        return cls(
            fingerprint=data["config_fingerprint"],
            amplitude_ratio=float(data["amplitude_ratio"]),
            position=int(data["position"]),
            error=math.nan if err is None else float(err),
            support=list(data.get("support", [])),
            coefficients=list(data.get("coefficients", [])),
            spectra=data.get("spectra", {}),
            runtime_s=float(data.get("runtime_s", 0.0)),
            config=data.get("config", {}),
            status=data.get("status", "ok"),
            reason=data.get("reason"),
        )


@dataclass
class SweepReport:
    amplitudes: list[float]
    positions: list[int]
    error_grid: np.ndarray
    records: list[TrialRecord] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def mean_errors(self) -> np.ndarray:
        if self.error_grid.size == 0:
            return np.zeros(len(self.amplitudes))
        out = np.full(len(self.amplitudes), math.nan)
        for i, row in enumerate(self.error_grid):
            ok = row[np.isfinite(row)]
            if ok.size:
                out[i] = ok.mean()
        return out

    @property
    def reference_amplitude(self) -> float | None:
        if not self.amplitudes:
            return None
        for a in self.amplitudes:
            if math.isclose(a, 0.5):
                return a
        return max(self.amplitudes)

    @property
    def max_reduction(self) -> float:
        """1 - min(mean error) / mean error at 0.5 v_pi (or the largest amplitude)."""
        means = self.mean_errors
        ref_amp = self.reference_amplitude
        if ref_amp is None or not np.isfinite(means).any():
            return 0.0
        ref = means[self.amplitudes.index(ref_amp)]
        if not math.isfinite(ref) or ref == 0:
            return 0.0
        return float(1.0 - np.nanmin(means) / ref)

    @property
    def failures(self) -> list[TrialRecord]:
        return [r for r in self.records if r.status != "ok"]


@dataclass(frozen=True)
class TermEnergies:
    mixed: float
    second_harmonic: float
    signal_independent: float
    signal_independent_ac: float

    @property
    def harmonic_to_mixed(self) -> float:
        return self.second_harmonic / self.mixed if self.mixed > 0 else math.inf

    def to_json(self) -> dict[str, float]:
        return {
            "mixed": self.mixed,
            "second_harmonic": self.second_harmonic,
            "signal_independent": self.signal_independent,
            "signal_independent_ac": self.signal_independent_ac,
            "harmonic_to_mixed": self.harmonic_to_mixed,
        }


# ---------------------------------------------------------------------------
# cached heavy pieces (dictionary and full-rate mixed atoms are ~160 MB each)


@lru_cache(maxsize=2)
def _dictionary(grid: TimeGrid, f_max: float) -> Dictionary:
    return build_dictionary(grid, f_max)


@lru_cache(maxsize=16)
def _chips(seed: int, n_chips: int, chip_rate: float) -> ChipSequence:
    return generate_chip_sequence(seed, n_chips, chip_rate)


@lru_cache(maxsize=2)
def _bank(grid: TimeGrid, f_max: float, seed: int, n_chips: int, chip_rate: float,
          lpf: FilterSpec, ac_coupled: bool) -> np.ndarray:
    ideal = chips_to_waveform(_chips(seed, n_chips, chip_rate), grid, 1.0)
    bank = mixed_atom_bank(_dictionary(grid, f_max), ideal, lpf, ac_coupled)
    bank.setflags(write=False)
    return bank


def clear_caches() -> None:
    _dictionary.cache_clear()
    _chips.cache_clear()
    _bank.cache_clear()


def _drives(config: TrialConfig) -> tuple[Waveform, Waveform, Waveform]:
    """(ideal unit chips, actual PRBS drive in volts, signal in radians)."""
    grid = config.grid
    p = config.prbs
    ideal = chips_to_waveform(_chips(p.seed, p.n_chips, p.chip_rate), grid, 1.0)
    drive = ideal.with_samples(config.modulator.v_code * ideal.samples)
    if p.bandlimit is not None:
        drive = bandlimit(drive, p.bandlimit)
    x = synthesize_multitone(config.tones, grid)
    return ideal, drive, x


def trial_rng(config: TrialConfig) -> np.random.Generator:
    """Noise generator owned by one trial: keyed on noise seed and position."""
    return np.random.default_rng(np.random.SeedSequence([config.noise.seed, config.plan.position]))


def run_single_trial(config: TrialConfig) -> TrialRecord:
    """generate -> bandlimit -> modulate -> detect -> lowpass -> decimate -> OMP -> score."""
    t0 = time.perf_counter()
    config.validate()
    ideal, drive, x = _drives(config)
    mod = config.modulator
    if config.model == "exact":
        optical = mzm_output(drive, x, mod)
    else:
        optical = mzm_small_signal(drive.with_samples(drive.samples / mod.v_code), x, mod)
    detected = photodetect(optical, config.pd, config.noise, trial_rng(config))
    y = decimate(lowpass(detected, config.receiver_lpf), config.plan)

    p = config.prbs
    dictionary = _dictionary(config.grid, config.f_max_dict)
    bank = _bank(config.grid, config.f_max_dict, p.seed, p.n_chips, p.chip_rate,
                 config.receiver_lpf, config.pd.ac_coupled)
    A = build_sensing_matrix(dictionary, mod, config.pd, ideal, config.receiver_lpf, config.plan,
                             bank=bank, assume_unit_gain=config.solver.assume_unit_gain)
    solution = omp(A, y, config.solver.sparsity_budget, config.solver.residual_tol)
    # A already carries the modelled gain, so coefficients are in signal units
    x_rec = reconstruct_signal(solution, dictionary, 1.0)
    error = reconstruction_error(x_rec, x)

    spectra = {
        "frequency_hz": dictionary.frequencies().tolist(),
        "original": dictionary.amplitude_spectrum(dictionary.project(x)).tolist(),
        "reconstructed": dictionary.amplitude_spectrum(solution.dense(dictionary.size)).tolist(),
    }
    return TrialRecord(
        fingerprint=config.fingerprint(),
        amplitude_ratio=config.amplitude_ratio,
        position=config.plan.position,
        error=error,
        support=[int(j) for j in solution.support],
        coefficients=[float(c) for c in solution.coefficients],
        spectra=spectra,
        runtime_s=time.perf_counter() - t0,
        config=config.to_dict(),
    )


def _failed(config: TrialConfig, exc: Exception) -> TrialRecord:
    log.warning("trial a=%g p=%d failed: %s", config.amplitude_ratio, config.plan.position, exc)
    return TrialRecord(config.fingerprint(), config.amplitude_ratio, config.plan.position, math.nan,
                       [], [], {}, 0.0, config.to_dict(), status="failed", reason=f"{type(exc).__name__}: {exc}")


def run_sweep(
    base_config: TrialConfig,
    amplitude_list: Sequence[float],
    position_list: Sequence[int],
    threads: int = 1,
) -> SweepReport:
    """One trial per (amplitude ratio, position); failed trials stay in the grid as NaN."""
    amplitudes = [float(a) for a in amplitude_list]
    positions = [int(p) for p in position_list]
    if not amplitudes or not positions:
        raise ValueError("amplitude and position lists must be non-empty")
    jobs = [(i, j, base_config.with_amplitude(a).with_position(p))
            for i, a in enumerate(amplitudes) for j, p in enumerate(positions)]

    def work(job):
        i, j, cfg = job
        try:
            return i, j, run_single_trial(cfg)
        except Exception as exc:  # noqa: BLE001 - a sweep must survive bad cells
            return i, j, _failed(cfg, exc)

    if threads > 1:
        # warm the shared caches once instead of racing on them
        p = base_config.prbs
        _bank(base_config.grid, base_config.f_max_dict, p.seed, p.n_chips, p.chip_rate,
              base_config.receiver_lpf, base_config.pd.ac_coupled)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(job) for job in jobs]

    grid = np.full((len(amplitudes), len(positions)), math.nan)
    records: list[TrialRecord] = [None] * len(jobs)  # type: ignore[list-item]
    for i, j, rec in results:
        grid[i, j] = rec.error
        records[i * len(positions) + j] = rec
    return SweepReport(amplitudes, positions, grid, records, base_config.to_dict())


def report_from_records(records: Iterable[TrialRecord]) -> SweepReport:
    """Rebuild the amplitude x position grid from stored trial records."""
    records = list(records)
    amplitudes = sorted({r.amplitude_ratio for r in records}, reverse=True)
    positions = sorted({r.position for r in records})
    grid = np.full((len(amplitudes), len(positions)), math.nan)
    for r in records:
        grid[amplitudes.index(r.amplitude_ratio), positions.index(r.position)] = r.error
    config = records[0].config if records else {}
    return SweepReport(amplitudes, positions, grid, records, config)


def decompose_terms(config: TrialConfig) -> TermEnergies:
    """Energies of the mixed, squared-signal and signal-free small-signal terms.

    Evaluated on the PRBS drive actually applied (bandlimited when configured),
    normalised by v_code so exact chips give s = +-1.
    """
    _, drive, x = _drives(config)
    mod: ModulatorParams = config.modulator
    s = drive.with_samples(drive.samples / mod.v_code)
    mixed, harmonic, independent = small_signal_terms(s, x, mod)
    ac = independent - independent.mean()
    return TermEnergies(
        float(mixed @ mixed),
        float(harmonic @ harmonic),
        float(independent @ independent),
        float(ac @ ac),
    )


# ---------------------------------------------------------------------------
# report writers


def _fmt(value: float) -> str:
    return "" if value is None or not math.isfinite(value) else repr(float(value))


def error_grid_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["amplitude"] + [f"position_{p}" for p in report.positions] + ["mean"])
    means = report.mean_errors
    for i, amp in enumerate(report.amplitudes):
        writer.writerow([_fmt(amp)] + [_fmt(v) for v in report.error_grid[i]] + [_fmt(means[i])])
    return buf.getvalue()


def spectra_csv(record: TrialRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frequency_hz", "original", "reconstructed"])
    spec = record.spectra
    for f, o, r in zip(spec.get("frequency_hz", []), spec.get("original", []), spec.get("reconstructed", [])):
        writer.writerow([_fmt(f), _fmt(o), _fmt(r)])
    return buf.getvalue()


def trial_stem(record: TrialRecord) -> str:
    return f"a{record.amplitude_ratio:.4f}_p{record.position:02d}"


def sweep_summary(report: SweepReport) -> dict[str, Any]:
    means = report.mean_errors
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "config": report.config,
        "amplitude_ratios": report.amplitudes,
        "positions": report.positions,
        "error_grid": [[None if not math.isfinite(v) else float(v) for v in row] for row in report.error_grid],
        "mean_errors": [None if not math.isfinite(v) else float(v) for v in means],
        "max_reduction": report.max_reduction,
        "failures": [{"amplitude_ratio": r.amplitude_ratio, "position": r.position, "reason": r.reason}
                     for r in report.failures],
        "hardware_reference": HARDWARE_REFERENCE,
        "trials": [{"amplitude_ratio": r.amplitude_ratio, "position": r.position,
                    "config_fingerprint": r.fingerprint, "error": None if not math.isfinite(r.error) else r.error,
                    "support": r.support} for r in report.records],
    }


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_report(report: SweepReport, out_dir: str | Path,
                formats: Sequence[str] = ("csv", "json", "spectra", "records")) -> list[Path]:
    """Write errors.csv, sweep.json, spectra/*.csv and records/*.json under ``out_dir``."""
    out = Path(out_dir)
    written = []
    if "csv" in formats:
        written.append(_write(out / "errors.csv", error_grid_csv(report)))
    if "json" in formats:
        written.append(_write(out / "sweep.json", json.dumps(sweep_summary(report), indent=2) + "\n"))
    ok = [r for r in report.records if r.status == "ok"]
    if "spectra" in formats:
        for rec in ok:
            written.append(_write(out / "spectra" / f"{trial_stem(rec)}.csv", spectra_csv(rec)))
    if "records" in formats:
        for rec in report.records:
            written.append(_write(out / "records" / f"{trial_stem(rec)}.json",
                                  json.dumps(rec.to_json(), indent=2) + "\n"))
    return written
