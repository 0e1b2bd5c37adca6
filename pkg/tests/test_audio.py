import numpy as np
import pytest
from scipy.io import wavfile

from src.audio.index import normalize_peak, read_wav, resample, write_wav
from src.exceptions import WavFormatError
from src.models.signals import Waveform
from src.simulation.signals import tone


class TestWav:
    def test_write_then_read_within_quantization(self, tmp_path, rng):
        samples = rng.uniform(-1.0, 1.0, 4000)
        path = tmp_path / "noise.wav"
        write_wav(Waveform(16_000.0, samples), path)
        back = read_wav(path)
        assert back.sample_rate == 16_000.0
        assert np.abs(back.samples - samples).max() <= 2.0 ** -15

    def test_file_is_mono_pcm16(self, tmp_path):
        path = tmp_path / "zeros.wav"
        write_wav(Waveform(8000.0, np.zeros(100)), path)
        rate, data = wavfile.read(path)
        assert rate == 8000
        assert data.dtype == np.int16
        assert data.ndim == 1
        assert not np.any(data)

    def test_out_of_range_samples_are_clipped(self, tmp_path):
        path = tmp_path / "loud.wav"
        write_wav(Waveform(8000.0, [1.5, -2.0, 0.5]), path)
        back = read_wav(path).samples
        assert back[0] == pytest.approx(1.0)
        assert back[1] == pytest.approx(-1.0)

    def test_stereo_is_downmixed(self, tmp_path):
        path = tmp_path / "stereo.wav"
        wavfile.write(path, 8000, np.array([[32767, 0], [0, -32767]], dtype=np.int16))
        back = read_wav(path)
        np.testing.assert_allclose(back.samples, [0.5, -0.5])

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "junk.wav"
        path.write_bytes(b"RIFF\x10\x00\x00\x00JUNKJUNKJUNK")
        with pytest.raises(WavFormatError):
            read_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "absent.wav")


class TestResample:
    def test_same_rate_is_identity(self):
        w = tone(440.0, 0.1, 16_000.0)
        assert resample(w, 16_000.0) is w

    def test_tone_survives_rate_change(self):
        w = tone(1000.0, 0.5, 100_000.0)
        out = resample(w, 16_000.0)
        assert out.sample_rate == 16_000.0
        assert abs(len(out) - 8000) <= 1
        interior = out.samples[800:-800]
        assert np.abs(interior).max() == pytest.approx(1.0, rel=0.01)
        expected = np.sin(2 * np.pi * 1000.0 * np.arange(len(out)) / 16_000.0)
        assert np.abs(out.samples - expected)[800:-800].max() < 0.01

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            resample(tone(440.0, 0.1), 0.0)


class TestNormalize:
    def test_scales_to_peak(self):
        w, gain = normalize_peak(Waveform(100.0, [0.1, -0.3, 0.2]), 0.9)
        assert gain == pytest.approx(3.0)
        assert np.abs(w.samples).max() == pytest.approx(0.9)

    def test_silence_is_left_alone(self):
        silent = Waveform(100.0, np.zeros(5))
        w, gain = normalize_peak(silent)
        assert gain == 1.0
        assert w is silent
