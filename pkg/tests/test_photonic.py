import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonic_rd.errors import InvalidArgumentError
from photonic_rd.photonic import (
    ModulatorParams,
    NoiseSpec,
    PdParams,
    mzm_output,
    mzm_small_signal,
    photodetect,
    small_signal_terms,
)
from photonic_rd.waveforms import (
    FOUR_TONE_HZ,
    Waveform,
    chips_to_waveform,
    default_tones,
    generate_chip_sequence,
    make_time_grid,
    synthesize_multitone,
)

ONE = make_time_grid(1.0, 1)


def w(values, grid=None):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return Waveform(grid or make_time_grid(1.0, values.size), values)


@pytest.fixture(scope="module")
def chips(grid):
    return chips_to_waveform(generate_chip_sequence(0x7FFF, 1000, 500e6), grid, 1.0)


@pytest.fixture(scope="module")
def tones(grid):
    return synthesize_multitone(default_tones(FOUR_TONE_HZ), grid)


class TestExactModel:
    @pytest.mark.parametrize(
        "v_dc, prbs, expected",
        [(0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (1.0, 0.5, 0.5)],
    )
    def test_anchor_points(self, v_dc, prbs, expected):
        params = ModulatorParams(v_pi=1.0, v_code=0.5, v_dc=v_dc)
        out = mzm_output(w(prbs), w(0.0), params)
        assert out.samples[0] == pytest.approx(expected, abs=1e-12)

    def test_default_bias_is_v_pi(self):
        assert ModulatorParams(v_pi=3.0, v_code=1.0).v_dc == 3.0

    def test_grid_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            mzm_output(w([0, 0]), w([0, 0, 0]), ModulatorParams())

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-5, 5), min_size=1, max_size=20),
        st.floats(0.1, 3),
        st.floats(-3, 3),
    )
    def test_range(self, drive, v_pi, v_dc):
        drive = np.array(drive)
        out = mzm_output(w(drive), w(np.sin(drive)), ModulatorParams(v_pi=v_pi, v_code=0.5, v_dc=v_dc))
        assert out.samples.min() >= 0.0 and out.samples.max() <= 1.0

    def test_ideal_mixing_identity(self, grid, chips, tones):
        params = ModulatorParams(v_pi=1.0, v_code=0.5)
        drive = chips.with_samples(0.5 * chips.samples)
        out = mzm_output(drive, tones, params).samples
        s, x = chips.samples, tones.samples
        np.testing.assert_allclose(out, 0.5 + 0.5 * s * np.sin(x), atol=1e-15)
        assert np.all(np.abs(out - (0.5 + 0.5 * s * x)) <= np.abs(x) ** 3 / 6 + 1e-15)


class TestSmallSignal:
    def test_quadrature_reduces_to_ideal_mixing(self, chips, tones):
        out = mzm_small_signal(chips, tones, ModulatorParams(v_pi=1.0, v_code=0.5)).samples
        np.testing.assert_allclose(out, 0.5 * chips.samples * tones.samples + 0.5, atol=1e-15)

    @pytest.mark.parametrize("ratio", [0.5, 0.432, 0.243, 0.177])
    def test_signal_off_baseline(self, chips, ratio):
        params = ModulatorParams(v_pi=1.0, v_code=ratio)
        out = mzm_small_signal(chips, chips.with_samples(np.zeros(chips.samples.size)), params).samples
        np.testing.assert_allclose(out, (1 - math.cos(params.alpha)) / 2, atol=1e-15)

    def test_plug_in(self):
        out = mzm_small_signal(w(1.0), w(0.1), ModulatorParams(v_pi=1.0, v_code=0.5))
        assert out.samples[0] == pytest.approx(0.55, abs=1e-15)

    @pytest.mark.parametrize("ratio", [0.5, 0.432, 0.243])
    def test_expansion_is_third_order(self, chips, tones, ratio):
        params = ModulatorParams(v_pi=1.0, v_code=ratio)
        unit = tones.samples / np.abs(tones.samples).max()
        devs = []
        for d in (0.2, 0.1):
            x = tones.with_samples(d * unit)
            exact = mzm_output(chips.with_samples(ratio * chips.samples), x, params).samples
            approx = mzm_small_signal(chips, x, params).samples
            devs.append(np.abs(exact - approx).max())
        assert devs[0] <= 0.2**3
        assert devs[0] / devs[1] >= 6

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.sampled_from([-1.0, 1.0]), min_size=4, max_size=4),
        st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4),
        st.floats(0.05, 0.5),
    )
    def test_chip_sign_symmetry(self, s, x, ratio):
        params = ModulatorParams(v_pi=1.0, v_code=ratio)
        s, x = np.array(s), np.array(x)
        total = mzm_small_signal(w(s), w(x), params).samples + mzm_small_signal(w(-s), w(x), params).samples
        ca = math.cos(params.alpha)
        np.testing.assert_allclose(total, 2 * (0.25 * ca * x**2 - 0.5 * ca + 0.5), atol=1e-14)

    def test_coefficients_monotone_in_v_code(self):
        ratios = np.linspace(0.01, 0.5, 60)
        mix = [ModulatorParams(v_pi=1.0, v_code=r).mixing_gain for r in ratios]
        harm = [ModulatorParams(v_pi=1.0, v_code=r).harmonic_gain for r in ratios]
        assert np.all(np.diff(mix) > 0)
        assert np.all(np.diff(harm) < 0)
        assert harm[-1] == pytest.approx(0.0, abs=1e-16)

    def test_terms_sum_to_model(self, chips, tones):
        params = ModulatorParams(v_pi=1.0, v_code=0.3)
        parts = small_signal_terms(chips, tones, params)
        np.testing.assert_allclose(sum(parts), mzm_small_signal(chips, tones, params).samples, atol=0)


class TestPhotodetect:
    def test_constant_input_gives_zero(self):
        out = photodetect(w(np.full(64, 0.3)), PdParams(), NoiseSpec())
        assert not out.samples.any()

    def test_ac_output_zero_mean(self, rng):
        out = photodetect(w(rng.uniform(0, 1, 1000)), PdParams(gain=2.0), NoiseSpec())
        assert abs(out.samples.mean()) < 1e-15

    def test_dc_coupled_keeps_offset(self):
        out = photodetect(w(np.full(4, 0.25)), PdParams(gain=2.0, ac_coupled=False), NoiseSpec())
        np.testing.assert_allclose(out.samples, 0.5)

    def test_noiseless_is_deterministic(self, rng):
        x = w(rng.uniform(0, 1, 100))
        a = photodetect(x, PdParams(), NoiseSpec())
        b = photodetect(x, PdParams(), NoiseSpec(seed=99))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_thermal_variance(self, grid, rng):
        optical = Waveform(grid, rng.uniform(0.2, 0.8, grid.n_samples))
        clean = photodetect(optical, PdParams(), NoiseSpec())
        v = 0.03
        noisy = photodetect(optical, PdParams(), NoiseSpec(c_thermal=v**2, seed=5))
        assert np.var(noisy.samples - clean.samples) == pytest.approx(v**2, rel=0.1)

    def test_variance_model_uses_mean_intensity(self):
        spec = NoiseSpec(c_thermal=1.0, c_shot=2.0, c_rin=4.0)
        assert spec.variance(0.5) == pytest.approx(1.0 + 1.0 + 1.0)

    def test_seeded_noise_reproducible(self, rng):
        x = w(rng.uniform(0, 1, 256))
        spec = NoiseSpec(c_thermal=1e-3, seed=7)
        np.testing.assert_array_equal(photodetect(x, noise=spec).samples, photodetect(x, noise=spec).samples)

    def test_rejects_negative_coefficients(self):
        with pytest.raises(InvalidArgumentError):
            NoiseSpec(c_shot=-1.0)

    def test_rejects_out_of_range_intensity(self):
        with pytest.raises(InvalidArgumentError):
            photodetect(w([0.5, 1.5]))
