"""Trial/sweep configuration: dataclasses plus YAML load and dump.

Every physical quantity in the file format carries its unit in the key name
(``chip_rate_hz``, ``v_pi_v``). Loading materialises all defaults so the
dumped form is fully explicit.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import yaml

from .digitizer import DecimationPlan
from .errors import ConfigError, InvalidArgumentError
from .photonic import ModulatorParams, NoiseSpec, PdParams
from .waveforms import (
    FIVE_TONE_HZ,
    FOUR_TONE_HZ,
    MAX_PEAK_PHASE_RAD,
    FilterSpec,
    TimeGrid,
    ToneSpec,
    default_tones,
    make_time_grid,
    samples_per_chip,
)

TONE_SETS = {"four_tone": FOUR_TONE_HZ, "five_tone": FIVE_TONE_HZ}
REPORTED_AMPLITUDES = (0.5, 0.432, 0.243, 0.177)
DEFAULT_AMPLITUDES = (0.5, 0.432, 0.35, 0.3, 0.28, 0.243, 0.21, 0.177)
DEFAULT_POSITIONS = tuple(range(1, 21))

# Synthetic receiver noise that makes the low-bias SNR penalty visible.
NOISE_PRESETS: dict[str, dict[str, Any]] = {
    "none": {"c_thermal": 0.0, "c_shot": 0.0, "c_rin": 0.0},
    "inflection": {"c_thermal": 1e-2, "c_shot": 0.0, "c_rin": 0.0},
}


@dataclass(frozen=True)
class PrbsConfig:
    seed: int = 0x7FFF
    chip_rate: float = 500e6
    n_chips: int = 1000
    # None drives the modulator with ideal NRZ chips
    bandlimit: FilterSpec | None = FilterSpec("brickwall_fft", 500e6)


@dataclass(frozen=True)
class SolverConfig:
    sparsity_budget: int = 9
    residual_tol: float = 1e-6
    assume_unit_gain: bool = False


@dataclass(frozen=True)
class TrialConfig:
    grid: TimeGrid = TimeGrid(10e9, 20000)
    tones: tuple[ToneSpec, ...] = tuple(default_tones(FOUR_TONE_HZ))
    max_peak_rad: float = MAX_PEAK_PHASE_RAD
    prbs: PrbsConfig = PrbsConfig()
    modulator: ModulatorParams = ModulatorParams(v_pi=1.0, v_code=0.5)
    pd: PdParams = PdParams()
    noise: NoiseSpec = NoiseSpec()
    receiver_lpf: FilterSpec = FilterSpec("brickwall_fft", 25e6)
    plan: DecimationPlan = DecimationPlan(200, 1, 100)
    f_max_dict: float = 250e6
    solver: SolverConfig = SolverConfig()
    model: str = "exact"

    @property
    def amplitude_ratio(self) -> float:
        return self.modulator.v_code / self.modulator.v_pi

    def with_amplitude(self, ratio: float) -> TrialConfig:
        mod = replace(self.modulator, v_code=ratio * self.modulator.v_pi)
        return replace(self, modulator=mod)

    def with_position(self, position: int) -> TrialConfig:
        return replace(self, plan=replace(self.plan, position=position))

    def validate(self) -> TrialConfig:
        """Check cross-field geometry; raises ConfigError naming the field."""
        g = self.grid
        try:
            spc = samples_per_chip(g, self.prbs.chip_rate)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), "prbs.chip_rate_hz") from None
        if spc * self.prbs.n_chips != g.n_samples:
            raise ConfigError(
                f"{self.prbs.n_chips} chips at {spc} samples/chip do not span {g.n_samples} samples",
                "prbs.n_chips",
            )
        if not 1 <= self.plan.position <= spc:
            raise ConfigError(f"position must lie in [1, {spc}]", "receiver.position")
        try:
            self.plan.indices(g.n_samples)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), "receiver.n_measurements") from None
        for i, tone in enumerate(self.tones):
            if g.bin_of(tone.frequency) is None:
                raise ConfigError(
                    f"tone {tone.frequency!r} Hz is off the {g.frequency_step:g} Hz grid",
                    f"signal.tones[{i}].frequency_hz",
                )
            if not 0 <= tone.frequency < g.nyquist:
                raise ConfigError("tone frequency outside [0, Nyquist)", f"signal.tones[{i}].frequency_hz")
        freqs = [t.frequency for t in self.tones]
        if len(set(freqs)) != len(freqs):
            raise ConfigError(f"duplicate tone frequencies {freqs}", "signal.tones")
        peak = sum(abs(t.amplitude) for t in self.tones)
        if peak > self.max_peak_rad * (1 + 1e-9):
            raise ConfigError(
                f"tones reach {peak:.4g} rad peak, above the {self.max_peak_rad:g} rad small-signal cap",
                "signal.tones",
            )
        for name, spec in (("prbs.bandwidth_hz", self.prbs.bandlimit), ("receiver.lpf_cutoff_hz", self.receiver_lpf)):
            if spec is not None and not 0 < spec.cutoff < g.nyquist:
                raise ConfigError(f"cutoff must lie in (0, {g.nyquist:g}) Hz", name)
        if g.bin_of(self.f_max_dict) is None or not 0 <= self.f_max_dict < g.nyquist:
            raise ConfigError("dictionary ceiling must be on-grid and below Nyquist", "reconstruction.f_max_dict_hz")
        m = self.plan.output_length(g.n_samples)
        if not 0 <= self.solver.sparsity_budget <= m:
            raise ConfigError(f"sparsity budget must lie in [0, {m}]", "reconstruction.sparsity_budget")
        if self.model not in ("exact", "small_signal"):
            raise ConfigError("model must be 'exact' or 'small_signal'", "model")
        return self

    def to_dict(self) -> dict[str, Any]:
        bl = self.prbs.bandlimit
        return {
            "grid": {"sample_rate_hz": self.grid.sample_rate, "n_samples": self.grid.n_samples},
            "signal": {
                "max_peak_rad": self.max_peak_rad,
                "tones": [
                    {"frequency_hz": t.frequency, "amplitude_rad": t.amplitude, "phase_rad": t.phase}
                    for t in self.tones
                ],
            },
            "prbs": {
                "seed": self.prbs.seed,
                "chip_rate_hz": self.prbs.chip_rate,
                "n_chips": self.prbs.n_chips,
                "bandwidth_hz": None if bl is None else bl.cutoff,
                "filter_kind": "brickwall_fft" if bl is None else bl.kind,
                "fir_taps": 201 if bl is None else bl.taps,
            },
            "modulator": {
                "v_pi_v": self.modulator.v_pi,
                "v_dc_v": self.modulator.v_dc,
                "v_code_v": self.modulator.v_code,
            },
            "photodetector": {"gain": self.pd.gain, "ac_coupled": self.pd.ac_coupled},
            "noise": {
                "c_thermal": self.noise.c_thermal,
                "c_shot": self.noise.c_shot,
                "c_rin": self.noise.c_rin,
                "seed": self.noise.seed,
            },
            "receiver": {
                "lpf_cutoff_hz": self.receiver_lpf.cutoff,
                "lpf_kind": self.receiver_lpf.kind,
                "fir_taps": self.receiver_lpf.taps,
                "decimation_factor": self.plan.factor,
                "position": self.plan.position,
                "n_measurements": self.plan.n_output,
            },
            "reconstruction": {
                "f_max_dict_hz": self.f_max_dict,
                "sparsity_budget": self.solver.sparsity_budget,
                "residual_tol": self.solver.residual_tol,
                "assume_unit_gain": self.solver.assume_unit_gain,
            },
            "model": self.model,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SweepConfig:
    amplitudes: tuple[float, ...] = DEFAULT_AMPLITUDES
    positions: tuple[int, ...] = DEFAULT_POSITIONS
    threads: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    trial: TrialConfig = field(default_factory=TrialConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def to_dict(self) -> dict[str, Any]:
        out = self.trial.to_dict()
        out["sweep"] = {
            "amplitude_ratios": list(self.sweep.amplitudes),
            "positions": list(self.sweep.positions),
            "threads": self.sweep.threads,
        }
        return out


# ---------------------------------------------------------------------------
# parsing


_SCHEMA: dict[str, set[str]] = {
    "grid": {"sample_rate_hz", "n_samples"},
    "signal": {"max_peak_rad", "tones", "tone_set", "peak_phase_rad"},
    "prbs": {"seed", "chip_rate_hz", "n_chips", "bandwidth_hz", "filter_kind", "fir_taps"},
    "modulator": {"v_pi_v", "v_dc_v", "v_code_v", "v_code_ratio"},
    "photodetector": {"gain", "ac_coupled"},
    "noise": {"c_thermal", "c_shot", "c_rin", "seed", "preset"},
    "receiver": {"lpf_cutoff_hz", "lpf_kind", "fir_taps", "decimation_factor", "position", "n_measurements"},
    "reconstruction": {"f_max_dict_hz", "sparsity_budget", "residual_tol", "assume_unit_gain"},
    "model": set(),
    "sweep": {"amplitude_ratios", "positions", "threads"},
    "noise_presets": set(),
    "description": set(),
}


def _line_map(node: yaml.Node, prefix: str = "", out: dict[str, int] | None = None) -> dict[str, int]:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = f"{prefix}.{key.value}" if prefix else str(key.value)
            out[path] = key.start_mark.line + 1
            _line_map(value, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = item.start_mark.line + 1
            _line_map(item, path, out)
    return out


class _Section:
    """Typed accessor over one mapping that reports bad fields by path."""

    def __init__(self, data: dict[str, Any] | None, path: str, lines: dict[str, int]):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("expected a mapping", path, lines.get(path))
        self.data, self.path, self.lines = data, path, lines

    def err(self, key: str, msg: str) -> ConfigError:
        full = f"{self.path}.{key}" if self.path else key
        return ConfigError(msg, full, self.lines.get(full, self.lines.get(self.path)))

    def number(self, key: str, default: float | None, *, positive: bool = False, allow_none: bool = False) -> float | None:
        value = self.data.get(key, default)
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise self.err(key, f"expected a finite number, got {value!r}")
        if positive and value <= 0:
            raise self.err(key, f"must be positive, got {value!r}")
        return float(value)

    def integer(self, key: str, default: int | None, *, minimum: int | None = None, allow_none: bool = False) -> int | None:
        value = self.data.get(key, default)
        if value is None and allow_none:
            return None
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.err(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.err(key, f"must be >= {minimum}, got {value}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        value = self.data.get(key, default)
        if not isinstance(value, bool):
            raise self.err(key, f"expected true/false, got {value!r}")
        return value

    def choice(self, key: str, default: str, options: Iterable[str]) -> str:
        value = self.data.get(key, default)
        options = tuple(options)
        if value not in options:
            raise self.err(key, f"expected one of {options}, got {value!r}")
        return value


def _check_keys(raw: dict[str, Any], lines: dict[str, int]) -> None:
    for section, value in raw.items():
        if section not in _SCHEMA:
            raise ConfigError("unknown section", section, lines.get(section))
        allowed = _SCHEMA[section]
        if allowed and isinstance(value, dict):
            for key in value:
                if key not in allowed:
                    path = f"{section}.{key}"
                    raise ConfigError("unknown key", path, lines.get(path))


def _parse_tones(sig: _Section) -> tuple[tuple[ToneSpec, ...], float]:
    cap = sig.number("max_peak_rad", MAX_PEAK_PHASE_RAD, positive=True)
    raw_tones = sig.data.get("tones")
    if raw_tones is None:
        name = sig.data.get("tone_set", "four_tone")
        if name not in TONE_SETS:
            raise sig.err("tone_set", f"expected one of {tuple(TONE_SETS)}, got {name!r}")
        peak = sig.number("peak_phase_rad", cap, positive=True)
        return tuple(default_tones(TONE_SETS[name], peak)), cap
    if not isinstance(raw_tones, list):
        raise sig.err("tones", "expected a list of tones")
    tones = []
    for i, item in enumerate(raw_tones):
        t = _Section(item, f"signal.tones[{i}]", sig.lines)
        tones.append(
            ToneSpec(
                t.number("frequency_hz", None),
                t.number("amplitude_rad", None),
                t.number("phase_rad", 0.0),
            )
        )
    return tuple(tones), cap


def _parse_noise(raw: dict[str, Any], lines: dict[str, int]) -> NoiseSpec:
    sec = _Section(raw.get("noise"), "noise", lines)
    presets = dict(NOISE_PRESETS)
    for name, values in (raw.get("noise_presets") or {}).items():
        if isinstance(values, dict):
            presets[name] = {k: v for k, v in values.items() if k in ("c_thermal", "c_shot", "c_rin")}
    base: dict[str, Any] = {}
    if "preset" in sec.data:
        name = sec.data["preset"]
        if name not in presets:
            raise sec.err("preset", f"unknown noise preset {name!r}; known: {sorted(presets)}")
        base = presets[name]
    vals = {k: sec.number(k, base.get(k, 0.0)) for k in ("c_thermal", "c_shot", "c_rin")}
    for key, value in vals.items():
        if value < 0:
            raise sec.err(key, "noise coefficients must be >= 0")
    return NoiseSpec(**vals, seed=sec.integer("seed", 0, minimum=0))


def config_from_dict(raw: dict[str, Any], lines: dict[str, int] | None = None) -> ExperimentConfig:
    lines = lines or {}
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    _check_keys(raw, lines)
    base = TrialConfig()

    g = _Section(raw.get("grid"), "grid", lines)
    grid = make_time_grid(
        g.number("sample_rate_hz", base.grid.sample_rate, positive=True),
        g.integer("n_samples", base.grid.n_samples, minimum=1),
    )

    tones, cap = _parse_tones(_Section(raw.get("signal"), "signal", lines))

    p = _Section(raw.get("prbs"), "prbs", lines)
    seed = p.integer("seed", base.prbs.seed, minimum=1)
    if seed > 0x7FFF:
        raise p.err("seed", "PRBS-15 seed must fit in 15 bits")
    bw = p.number("bandwidth_hz", 500e6, positive=True, allow_none=True)
    kind = p.choice("filter_kind", "brickwall_fft", ("brickwall_fft", "windowed_sinc_fir"))
    taps = p.integer("fir_taps", 201, minimum=3)
    try:
        bandlimit = None if bw is None else FilterSpec(kind, bw, taps)
    except InvalidArgumentError as exc:
        raise p.err("fir_taps", str(exc)) from None
    prbs = PrbsConfig(
        seed,
        p.number("chip_rate_hz", base.prbs.chip_rate, positive=True),
        p.integer("n_chips", base.prbs.n_chips, minimum=1),
        bandlimit,
    )

    m = _Section(raw.get("modulator"), "modulator", lines)
    v_pi = m.number("v_pi_v", 1.0, positive=True)
    v_dc = m.number("v_dc_v", None, allow_none=True)
    if "v_code_v" in m.data and "v_code_ratio" in m.data:
        raise m.err("v_code_ratio", "give either v_code_v or v_code_ratio, not both")
    if "v_code_ratio" in m.data:
        v_code = m.number("v_code_ratio", None, positive=True) * v_pi
    else:
        v_code = m.number("v_code_v", 0.5 * v_pi, positive=True)
    modulator = ModulatorParams(v_pi=v_pi, v_code=v_code, v_dc=v_dc)

    d = _Section(raw.get("photodetector"), "photodetector", lines)
    pd = PdParams(d.number("gain", 1.0, positive=True), d.boolean("ac_coupled", True))

    noise = _parse_noise(raw, lines)

    r = _Section(raw.get("receiver"), "receiver", lines)
    lpf_kind = r.choice("lpf_kind", "brickwall_fft", ("brickwall_fft", "windowed_sinc_fir"))
    try:
        lpf = FilterSpec(lpf_kind, r.number("lpf_cutoff_hz", 25e6, positive=True), r.integer("fir_taps", 201, minimum=3))
    except InvalidArgumentError as exc:
        raise r.err("fir_taps", str(exc)) from None
    plan = DecimationPlan(
        r.integer("decimation_factor", 200, minimum=1),
        r.integer("position", 1, minimum=1),
        r.integer("n_measurements", 100, minimum=1, allow_none=True),
    )

    c = _Section(raw.get("reconstruction"), "reconstruction", lines)
    solver = SolverConfig(
        c.integer("sparsity_budget", 2 * len(tones) + 1, minimum=0),
        c.number("residual_tol", 1e-6),
        c.boolean("assume_unit_gain", False),
    )
    f_max = c.number("f_max_dict_hz", 250e6)

    model = raw.get("model", "exact")
    trial = TrialConfig(grid, tones, cap, prbs, modulator, pd, noise, lpf, plan, f_max, solver, model)
    try:
        trial.validate()
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            line = lines.get(exc.field) or lines.get(exc.field.rsplit(".", 1)[0])
            raise ConfigError(exc.message, exc.field, line) from None
        raise

    s = _Section(raw.get("sweep"), "sweep", lines)
    amps = s.data.get("amplitude_ratios", list(DEFAULT_AMPLITUDES))
    positions = s.data.get("positions", list(DEFAULT_POSITIONS))
    if not isinstance(amps, list) or not amps or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) and a > 0 for a in amps
    ):
        raise s.err("amplitude_ratios", "expected a non-empty list of positive ratios")
    if not isinstance(positions, list) or not positions or not all(
        isinstance(q, int) and not isinstance(q, bool) for q in positions
    ):
        raise s.err("positions", "expected a non-empty list of integer positions")
    spc = samples_per_chip(grid, prbs.chip_rate)
    bad = [q for q in positions if not 1 <= q <= spc]
    if bad:
        raise s.err("positions", f"positions {bad} outside [1, {spc}]")
    sweep = SweepConfig(tuple(float(a) for a in amps), tuple(positions), s.integer("threads", 1, minimum=1))
    return ExperimentConfig(trial, sweep)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML experiment file; errors carry line and field when known."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", None,
                          None if mark is None else mark.line + 1) from None
    lines = _line_map(node) if node is not None else {}
    try:
        return config_from_dict(raw, lines)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None


def default_config_text() -> str:
    return resources.files("photonic_rd").joinpath("data/default.config").read_text(encoding="utf-8")


def default_config() -> ExperimentConfig:
    return parse_config_text(default_config_text())


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(copy.deepcopy(cfg.to_dict()), sort_keys=False)
