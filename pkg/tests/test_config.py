import pytest

from photonic_rd.config import (
    TrialConfig,
    default_config,
    default_config_text,
    dump_config,
    parse_config_text,
)
from photonic_rd.errors import ConfigError


def test_default_matches_dataclass_defaults():
    cfg = default_config()
    assert cfg.trial.to_dict() == TrialConfig().to_dict()
    assert cfg.sweep.amplitudes == (0.5, 0.432, 0.35, 0.3, 0.28, 0.243, 0.21, 0.177)
    assert cfg.sweep.positions == tuple(range(1, 21))


def test_dump_round_trip_is_explicit():
    cfg = default_config()
    text = dump_config(cfg)
    assert "tone_set" not in text and "preset" not in text
    again = parse_config_text(text)
    assert again.to_dict() == cfg.to_dict()
    assert again.trial.fingerprint() == cfg.trial.fingerprint()


def test_fingerprint_tracks_content():
    base = TrialConfig()
    assert base.fingerprint() != base.with_amplitude(0.243).fingerprint()
    assert base.fingerprint() == TrialConfig().fingerprint()


def test_noise_preset():
    cfg = parse_config_text("noise: {preset: inflection, seed: 3}\n")
    assert cfg.trial.noise.c_thermal == pytest.approx(1e-2)
    assert cfg.trial.noise.seed == 3


def test_five_tone_budget_default():
    cfg = parse_config_text("signal: {tone_set: five_tone}\n")
    assert len(cfg.trial.tones) == 5
    assert cfg.trial.solver.sparsity_budget == 11


def test_ideal_prbs():
    cfg = parse_config_text("prbs: {bandwidth_hz: null}\n")
    assert cfg.trial.prbs.bandlimit is None


def test_unknown_key_reports_line_and_field():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("grid:\n  sample_rate_hz: 10.0e+9\n  n_sample: 5\n")
    assert exc.value.field == "grid.n_sample"
    assert exc.value.line == 3


def test_off_grid_tone_named():
    text = "signal:\n  tones:\n    - {frequency_hz: 20.0e+6, amplitude_rad: 0.05}\n    - {frequency_hz: 33.3e+6, amplitude_rad: 0.05}\n"
    with pytest.raises(ConfigError, match="33300000") as exc:
        parse_config_text(text)
    assert exc.value.field == "signal.tones[1].frequency_hz"
    assert exc.value.line == 4


def test_yaml_syntax_error_has_line():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("grid:\n  n_samples: [1, 2\n")
    assert exc.value.line is not None


@pytest.mark.parametrize(
    "text, field",
    [
        ("grid: {n_samples: 19999}\n", "prbs.n_chips"),
        ("receiver: {position: 21}\n", "receiver.position"),
        ("signal: {peak_phase_rad: 0.3}\n", "signal.tones"),
        ("prbs: {seed: 0}\n", "prbs.seed"),
        ("modulator: {v_pi_v: -1}\n", "modulator.v_pi_v"),
        ("noise: {c_shot: -1}\n", "noise.c_shot"),
        ("reconstruction: {sparsity_budget: 101}\n", "reconstruction.sparsity_budget"),
        ("sweep: {positions: [0, 1]}\n", "sweep.positions"),
        ("model: fancy\n", "model"),
    ],
)
def test_field_diagnostics(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.field == field


def test_shipped_text_is_documented():
    text = default_config_text()
    assert "synthetic" in text
