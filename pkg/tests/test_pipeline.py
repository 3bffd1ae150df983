"""Pipeline stages and the assembled five-stage chain."""

import numpy as np
import pytest

from pulsesense.dsp import (
    AmplitudeSeries,
    amplitude,
    read_segment_dump,
    remove_dc,
    run_pipeline,
    segment,
    standardize,
    write_segment_dump,
)
from pulsesense.errors import BadMagic, EmptyStream, WindowLongerThanSeries
from pulsesense.ingest import CsiStream, align
from pulsesense.synth import Scenario, Schedule, generate


def make_stream(values, fs=80.0):
    t = np.arange(values.shape[0]) / fs
    return CsiStream(t, values, fs)


class TestAmplitude:
    def test_pythagorean(self):
        stream = make_stream(np.array([[3 + 4j]]))
        assert amplitude(stream).values[0, 0] == 5.0

    def test_zero(self):
        stream = make_stream(np.array([[0 + 0j]]))
        assert amplitude(stream).values[0, 0] == 0.0

    def test_matches_hypot_oracle(self):
        """1000 random complex samples against element-wise sqrt(re^2+im^2)."""
        rng = np.random.default_rng(8)
        re = rng.uniform(-50, 50, (1000, 1))
        im = rng.uniform(-50, 50, (1000, 1))
        stream = make_stream(re + 1j * im)
        got = amplitude(stream).values
        expected = np.sqrt(re ** 2 + im ** 2)
        np.testing.assert_allclose(got, expected, rtol=1e-15)

    def test_empty_stream(self):
        stream = CsiStream(np.empty(0), np.empty((0, 4), dtype=complex), 80.0)
        with pytest.raises(EmptyStream):
            amplitude(stream)


class TestRemoveDc:
    def test_simple_column(self):
        series = AmplitudeSeries(np.array([[1.0], [2.0], [3.0]]), 80.0)
        np.testing.assert_allclose(remove_dc(series).values[:, 0], [-1, 0, 1],
                                   atol=1e-15)

    def test_constant_column_zeroed(self):
        series = AmplitudeSeries(np.full((3, 1), 5.0), 80.0)
        np.testing.assert_allclose(remove_dc(series).values, 0.0, atol=1e-15)

    def test_random_matrix_column_means_vanish(self):
        rng = np.random.default_rng(12)
        values = rng.uniform(0, 100, (400, 64))
        out = remove_dc(AmplitudeSeries(values, 80.0)).values
        scale = np.abs(values).max()
        assert np.abs(out.mean(axis=0)).max() < 1e-12 * scale

    def test_single_sample_column(self):
        series = AmplitudeSeries(np.array([[4.2, 7.0]]), 80.0)
        np.testing.assert_allclose(remove_dc(series).values, 0.0, atol=1e-15)


class TestSegment:
    def test_window_of_5s_at_80hz_is_400_packets(self):
        series = AmplitudeSeries(np.zeros((450, 2)), 80.0)
        windows = segment(series, 5.0)
        assert windows[0].shape == (400, 2)

    def test_spec_example_two_windows(self):
        series = AmplitudeSeries(np.zeros((101, 1)), 20.0)
        windows = segment(series, 5.0, 1)  # W = 100
        assert len(windows) == 2

    def test_exact_fit_single_window(self):
        series = AmplitudeSeries(np.zeros((80, 1)), 80.0)
        assert len(segment(series, 1.0)) == 1

    def test_stride(self):
        series = AmplitudeSeries(np.zeros((100, 1)), 10.0)
        assert len(segment(series, 1.0, 10)) == 10

    def test_window_longer_than_series(self):
        series = AmplitudeSeries(np.zeros((10, 1)), 80.0)
        with pytest.raises(WindowLongerThanSeries):
            segment(series, 1.0)


class TestStandardize:
    def test_two_sample_column(self):
        out = standardize(np.array([[1.0], [3.0]]))
        np.testing.assert_allclose(out[:, 0], [-1.0, 1.0], atol=1e-12)

    def test_constant_column_zeros(self):
        out = standardize(np.full((10, 2), 3.3))
        assert np.all(out == 0.0)

    def test_random_window_moments(self):
        rng = np.random.default_rng(3)
        out = standardize(rng.standard_normal((400, 64)) * 7 + 3)
        assert np.abs(out.mean(axis=0)).max() < 1e-9
        assert np.abs(out.std(axis=0) - 1.0).max() < 1e-9

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        win = rng.standard_normal((50, 4))
        once = standardize(win)
        twice = standardize(once)
        np.testing.assert_allclose(once, twice, atol=1e-9)

    def test_segment_then_standardize_preserves_shape_and_count(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            t_len = int(rng.integers(30, 300))
            fs = float(rng.uniform(5, 100))
            w = int(rng.integers(5, t_len + 1))
            stride = int(rng.integers(1, 20))
            series = AmplitudeSeries(rng.standard_normal((t_len, 3)), fs)
            windows = segment(series, w / fs, stride)
            assert len(windows) == (t_len - len(windows[0])) // stride + 1
            for win in windows:
                out = standardize(win)
                assert out.shape == win.shape


def heart_recording(duration_s=60.0, fs=80.0, n_sub=4, seed=0):
    scenario = Scenario(name="unit", duration_s=duration_s, sample_rate_hz=fs,
                        subcarriers=n_sub, hr_bpm=Schedule.constant(72.0),
                        br_brpm=Schedule.constant(15.0), noise_std=0.05,
                        seed=seed)
    rec = generate(scenario)
    return align(rec.stream, rec.heart), rec


class TestRunPipeline:
    def test_segment_count_60s(self):
        recording, _ = heart_recording()
        segments = run_pipeline(recording, "heart", 5.0, 1)
        assert len(segments) == 4401
        assert segments[0].values.shape == (400, 4)

    def test_segments_standardized(self):
        recording, _ = heart_recording()
        segments = run_pipeline(recording, "heart", 5.0, 200)
        for seg in segments:
            assert np.abs(seg.values.mean(axis=0)).max() < 1e-9
            std = seg.values.std(axis=0)
            live = std > 0
            assert np.abs(std[live] - 1.0).max() < 1e-9

    def test_determinism(self):
        recording, _ = heart_recording(duration_s=20.0)
        a = run_pipeline(recording, "heart", 5.0, 100)
        b = run_pipeline(recording, "heart", 5.0, 100)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.values, sb.values)
            assert sa.label == sb.label

    def test_rate_label_is_window_mean(self):
        recording, _ = heart_recording(duration_s=20.0)
        segments = run_pipeline(recording, "heart", 5.0, 100)
        for seg in segments:
            assert seg.label == pytest.approx(72.0)

    def test_apnea_majority_label(self):
        scenario = Scenario(name="apnea-unit", duration_s=60.0,
                            sample_rate_hz=20.0, subcarriers=2,
                            hr_bpm=Schedule.constant(72.0),
                            br_brpm=Schedule.constant(15.0),
                            apnea_intervals=((20.0, 40.0),),
                            noise_std=0.01, seed=1)
        rec = generate(scenario)
        recording = align(rec.stream, rec.apnea)
        segments = run_pipeline(recording, "apnea", 10.0, 40)
        w = segments[0].values.shape[0]
        fs = 20.0
        for seg in segments:
            t0 = seg.start_index / fs
            t1 = (seg.start_index + w - 1) / fs
            inside = max(0.0, min(t1, 40.0) - max(t0, 20.0))
            expected = 1.0 if inside / (t1 - t0) >= 0.5 else 0.0
            assert seg.label == expected, (t0, t1)

    def test_heart_band_rejects_low_frequencies(self):
        """Mean PSD below 0.4 Hz sits >= 25 dB under the passband (Hann
        periodogram oracle on synthetic input; Hann controls leakage from the
        strong cardiac line)."""
        scenario = Scenario(name="psd-unit", duration_s=120.0,
                            sample_rate_hz=80.0, subcarriers=3,
                            hr_bpm=Schedule.constant(72.0),
                            br_brpm=Schedule.constant(6.0),
                            noise_std=0.05, seed=7)
        rec = generate(scenario)
        recording = align(rec.stream, rec.heart)
        segments = run_pipeline(recording, "heart", 30.0, 400)
        psd_lo, psd_pass = [], []
        fs = 80.0
        w = segments[0].values.shape[0]
        taper = np.hanning(w)[:, None]
        for seg in segments:
            spec = np.abs(np.fft.rfft(seg.values * taper, axis=0)) ** 2
            freqs = np.fft.rfftfreq(w, 1 / fs)
            lo = (freqs > 0) & (freqs < 0.4)
            band = (freqs >= 0.8) & (freqs <= 2.17)
            psd_lo.append(spec[lo].mean())
            psd_pass.append(spec[band].mean())
        ratio_db = 10 * np.log10(np.mean(psd_lo) / np.mean(psd_pass))
        assert ratio_db <= -25.0


class TestPipelineConfig:
    def test_explicit_band_overrides_mode_default(self):
        from pulsesense.dsp import PipelineConfig, band_for_mode
        cfg = PipelineConfig.from_dict(
            {"mode": "heart", "band": {"low_hz": 0.5, "high_hz": 3.0}})
        assert cfg.effective_band() == (0.5, 3.0)
        cfg = PipelineConfig.from_dict({"mode": "breath"})
        assert cfg.effective_band() == band_for_mode("breath")

    def test_zero_phase_mode_runs_and_differs_from_causal(self):
        recording, _ = heart_recording(duration_s=20.0)
        causal = run_pipeline(recording, "heart", 5.0, 200)
        zp = run_pipeline(recording, "heart", 5.0, 200, zero_phase=True)
        assert len(causal) == len(zp)
        assert causal[0].values.shape == zp[0].values.shape
        assert not np.allclose(causal[0].values, zp[0].values)


class TestSegmentDump:
    def test_round_trip(self):
        recording, _ = heart_recording(duration_s=20.0)
        segments = run_pipeline(recording, "heart", 5.0, 100)
        data = write_segment_dump(segments)
        assert data[:6] == b"PSSEG1"
        values, labels = read_segment_dump(data)
        assert values.shape == (len(segments), 400, 4)
        for i, seg in enumerate(segments):
            np.testing.assert_array_equal(
                values[i], seg.values.astype(np.float32).astype(np.float64))
            assert labels[i] == np.float32(seg.label)

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            read_segment_dump(b"NOTSEG" + b"\x00" * 20)
