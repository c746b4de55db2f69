import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonic_rd.digitizer import DecimationPlan, decimate, lowpass
from photonic_rd.errors import InvalidArgumentError
from photonic_rd.waveforms import FilterSpec, ToneSpec, Waveform, make_time_grid, synthesize_multitone

LPF = FilterSpec("brickwall_fft", 25e6)


class TestLowpass:
    def test_passband_tone(self, grid):
        x = synthesize_multitone([ToneSpec(10e6, 1.0, 0.3)], grid)
        np.testing.assert_allclose(lowpass(x, LPF).samples, x.samples, rtol=0, atol=1e-12)

    def test_stopband_tone(self, grid):
        x = synthesize_multitone([ToneSpec(200e6, 1.0)], grid)
        assert np.abs(lowpass(x, LPF).samples).max() < 1e-12

    def test_white_noise_energy(self, grid, rng):
        x = Waveform(grid, rng.normal(size=grid.n_samples))
        assert lowpass(x, LPF).energy() <= x.energy()

    def test_cutoff_at_nyquist(self, grid):
        with pytest.raises(InvalidArgumentError):
            lowpass(Waveform(grid, np.zeros(grid.n_samples)), FilterSpec("brickwall_fft", 5e9))


class TestDecimate:
    def ramp(self, grid):
        return Waveform(grid, np.arange(grid.n_samples, dtype=float))

    def test_position_one(self, grid):
        y = decimate(self.ramp(grid), DecimationPlan(200, 1, 100))
        np.testing.assert_array_equal(y.values, np.arange(0, 20000, 200))
        assert y.equivalent_rate == pytest.approx(50e6)

    def test_position_sixteen(self, grid):
        y = decimate(self.ramp(grid), DecimationPlan(200, 16, 100))
        assert y.values[0] == 15
        assert len(y) == 100

    def test_identity(self, grid, rng):
        x = Waveform(grid, rng.normal(size=grid.n_samples))
        np.testing.assert_array_equal(decimate(x, DecimationPlan(1, 1, None)).values, x.samples)

    def test_open_length_fits_record(self, grid):
        assert DecimationPlan(200, 16, None).output_length(20000) == 100

    def test_plan_exceeds_record(self, grid):
        with pytest.raises(InvalidArgumentError):
            decimate(self.ramp(grid), DecimationPlan(200, 1, 101))

    def test_positions_partition_chip(self):
        offsets = [DecimationPlan(200, p).offset_samples for p in range(1, 21)]
        assert sorted(offsets) == list(range(20))

    @pytest.mark.parametrize("bad", [dict(factor=0), dict(position=0), dict(n_output=0)])
    def test_invalid_plan(self, bad):
        with pytest.raises(InvalidArgumentError):
            DecimationPlan(**bad)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(1, 20), st.integers(0, 2**31))
    def test_linearity(self, a, b, position, seed):
        g = make_time_grid(1.0, 400)
        r = np.random.default_rng(seed)
        w1, w2 = r.normal(size=400), r.normal(size=400)
        plan = DecimationPlan(20, position, None)
        lhs = decimate(Waveform(g, a * w1 + b * w2), plan).values
        rhs = a * decimate(Waveform(g, w1), plan).values + b * decimate(Waveform(g, w2), plan).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
