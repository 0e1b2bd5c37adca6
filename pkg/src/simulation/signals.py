from typing import Callable, Sequence

import numpy as np
from scipy.signal import butter, sosfiltfilt

from src.models.signals import Waveform

C1_HZ = 32.703195662574764


def _times(duration_s: float, sample_rate: float) -> np.ndarray:
    if duration_s < 0:
        raise ValueError(f"duration must be >= 0, got {duration_s}")
    if not sample_rate > 0:
        raise ValueError(f"sample_rate must be > 0, got {sample_rate}")
    return np.arange(int(round(duration_s * sample_rate))) / sample_rate


def silence(duration_s: float, sample_rate: float = 16_000.0) -> Waveform:
    return Waveform(sample_rate, np.zeros_like(_times(duration_s, sample_rate)))


def tone(freq_hz: float, duration_s: float, sample_rate: float = 16_000.0, amplitude: float = 1.0, phase: float = 0.0) -> Waveform:
    t = _times(duration_s, sample_rate)
    return Waveform(sample_rate, amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase))


def tones(freqs_hz: Sequence[float], duration_s: float, sample_rate: float = 16_000.0, amplitude: float = 1.0) -> Waveform:
    """Equal-amplitude sum scaled so the peak never exceeds `amplitude`."""
    if not freqs_hz:
        raise ValueError("need at least one frequency")
    t = _times(duration_s, sample_rate)
    total = sum(np.sin(2.0 * np.pi * f * t) for f in freqs_hz)
    return Waveform(sample_rate, amplitude * total / len(freqs_hz))


def chirp_frequency_at(f0: float, f1: float, duration_s: float) -> Callable[[np.ndarray], np.ndarray]:
    """Instantaneous frequency of a linear chirp as a function of time."""
    slope = (f1 - f0) / duration_s

    def frequency(t):
        return f0 + slope * np.asarray(t, dtype=np.float64)

    return frequency


def chirp(f0: float, f1: float, duration_s: float, sample_rate: float = 16_000.0, amplitude: float = 1.0) -> Waveform:
    t = _times(duration_s, sample_rate)
    slope = (f1 - f0) / duration_s if duration_s else 0.0
    phase = 2.0 * np.pi * (f0 * t + 0.5 * slope * t * t)
    return Waveform(sample_rate, amplitude * np.sin(phase))


def c_octaves(note_s: float = 0.5, sample_rate: float = 16_000.0, amplitude: float = 1.0, octaves: int = 8) -> Waveform:
    """C1..C8, one note after another, each with 10 ms raised-cosine edges."""
    t = _times(note_s, sample_rate)
    ramp = min(int(0.01 * sample_rate), t.size // 2)
    envelope = np.ones_like(t)
    if ramp:
        edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        envelope[:ramp] = edge
        envelope[-ramp:] = edge[::-1]
    notes = [envelope * np.sin(2.0 * np.pi * C1_HZ * 2 ** k * t) for k in range(octaves)]
    return Waveform(sample_rate, amplitude * np.concatenate(notes))


def speech_like(duration_s: float, sample_rate: float = 16_000.0, amplitude: float = 0.8, seed: int = 0) -> Waveform:
    """
    Speech-band stand-in: 100-3400 Hz band-limited noise under a ~4 Hz syllabic envelope
    with short pauses.
    """
    rng = np.random.default_rng(seed)
    t = _times(duration_s, sample_rate)
    if t.size == 0:
        return Waveform(sample_rate, t)
    high = min(3400.0, 0.45 * sample_rate)
    sos = butter(4, [100.0, high], btype="bandpass", fs=sample_rate, output="sos")
    carrier = rng.standard_normal(t.size)
    if t.size > 3 * (2 * sos.shape[0] + 1):
        carrier = sosfiltfilt(sos, carrier)
    syllable = np.clip(np.sin(2.0 * np.pi * 4.0 * t + rng.uniform(0, 2 * np.pi)), 0.0, None)
    pauses = (np.sin(2.0 * np.pi * 0.5 * t) > -0.8).astype(np.float64)
    signal = carrier * syllable * pauses
    peak = np.max(np.abs(signal))
    if peak > 0:
        signal = signal / peak
    return Waveform(sample_rate, amplitude * signal)
