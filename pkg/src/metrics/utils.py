import math
from typing import Tuple

import librosa
import numpy as np
from scipy.fft import dct
from scipy.signal import correlate, correlation_lags

from src.audio.index import resample
from src.models.signals import Waveform

MCD_CONSTANT = 10.0 * math.sqrt(2.0) / math.log(10.0)
MCD_FRAME_S = 0.025
MCD_HOP_S = 0.010
MCD_MELS = 40
MCD_COEFFS = 13
MEL_LOG_FLOOR = 1e-10
LSD_FFT = 2048
LSD_HOP = 512
LSD_FLOOR = 1e-8
# frames whose mean square is below this are silent
SILENCE_POWER = 1e-10
ALIGN_MAX_S = 0.1


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def common_rate(ref: Waveform, test: Waveform) -> Tuple[Waveform, Waveform]:
    return ref, resample(test, ref.sample_rate)


def alignment_lag(ref: np.ndarray, test: np.ndarray, max_lag: int) -> int:
    """Lag L such that test[n + L] lines up with ref[n] (peak of the signed cross-correlation)."""
    if not np.any(ref) or not np.any(test):
        return 0
    corr = correlate(test, ref, mode="full", method="fft")
    lags = correlation_lags(test.size, ref.size, mode="full")
    window = np.abs(lags) <= max_lag
    corr, lags = corr[window], lags[window]
    best = np.flatnonzero(corr >= corr.max() * (1.0 - 1e-9))
    return int(lags[best[np.argmin(np.abs(lags[best]))]])


def align(ref: Waveform, test: Waveform) -> Tuple[np.ndarray, np.ndarray, int]:
    a, b = ref.samples, test.samples
    lag = alignment_lag(a, b, int(ALIGN_MAX_S * ref.sample_rate))
    if lag >= 0:
        b = b[lag:]
    else:
        a = a[-lag:]
    n = min(a.size, b.size)
    return a[:n], b[:n], lag


def frame_power(samples: np.ndarray, frame: int, hop: int) -> np.ndarray:
    frames = librosa.util.frame(samples, frame_length=frame, hop_length=hop, axis=0)
    return np.mean(frames * frames, axis=1)


def magnitude_frames(samples: np.ndarray, n_fft: int, hop: int, win_length: int = None) -> np.ndarray:
    """|STFT| as frames x frequency, Hann window, no centering."""
    return np.abs(
        librosa.stft(samples, n_fft=n_fft, hop_length=hop, win_length=win_length, window="hann", center=False)
    ).T


def mel_cepstra(samples: np.ndarray, sample_rate: float) -> "tuple[np.ndarray, np.ndarray]":
    """c1..c13 per frame (c0 dropped) and per-frame power, 25 ms frames, 10 ms hop."""
    frame = int(round(MCD_FRAME_S * sample_rate))
    hop = int(round(MCD_HOP_S * sample_rate))
    n_fft = 1 << (frame - 1).bit_length()
    power_spectrum = magnitude_frames(samples, n_fft, hop, win_length=frame) ** 2
    basis = librosa.filters.mel(sr=sample_rate, n_fft=n_fft, n_mels=MCD_MELS, fmin=0.0, fmax=sample_rate / 2, htk=True, norm=None)
    mel = np.log(np.maximum(power_spectrum @ basis.T, MEL_LOG_FLOOR))
    cepstra = dct(mel, type=2, norm="ortho", axis=1)[:, 1:MCD_COEFFS + 1]
    return cepstra, frame_power(samples, n_fft, hop)
