import struct
from fractions import Fraction
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from src.config.logging import get_logger
from src.exceptions import WavFormatError
from src.models.signals import Waveform

logger = get_logger(__name__)

PCM16_SCALE = 32767.0


def write_wav(waveform: Waveform, path: Union[str, Path]) -> None:
    """16-bit PCM mono RIFF/WAVE, fmt + data chunks only. Out-of-range samples are clipped with a warning."""
    path = Path(path)
    samples = waveform.samples
    if samples.size and np.max(np.abs(samples)) > 1.0:
        logger.warning(
            "wav_samples_clipped",
            path=str(path),
            peak=float(np.max(np.abs(samples))),
            clipped_count=int(np.count_nonzero(np.abs(samples) > 1.0)),
        )
    pcm = np.round(np.clip(samples, -1.0, 1.0) * PCM16_SCALE).astype("<i2")
    rate = int(round(waveform.sample_rate))
    if rate != waveform.sample_rate:
        logger.warning("wav_rate_rounded", path=str(path), sample_rate=waveform.sample_rate, written_rate=rate)
    try:
        wavfile.write(str(path), rate, pcm)
    except OSError as e:
        raise OSError(f"Failed to write WAV {path}: {e}") from e


def read_wav(path: Union[str, Path]) -> Waveform:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"WAV file not found: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except (ValueError, EOFError, struct.error) as e:
        raise WavFormatError(f"Malformed WAV {path}: {e}") from e

    if data.ndim == 2:
        logger.warning("wav_downmixed_to_mono", path=str(path), channels=int(data.shape[1]))
        data = data.astype(np.float64).mean(axis=1) if data.dtype.kind == "f" else _pcm_to_float(data).mean(axis=1)
    elif data.dtype.kind != "f":
        data = _pcm_to_float(data)
    if rate <= 0:
        raise WavFormatError(f"Invalid sample rate {rate} in {path}")
    return Waveform(float(rate), np.asarray(data, dtype=np.float64))


def _pcm_to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / PCM16_SCALE
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483647.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 127.0
    raise WavFormatError(f"Unsupported PCM sample type {data.dtype}")


def resample(waveform: Waveform, out_rate: float) -> Waveform:
    """Band-limited polyphase rate conversion; identity when the rates match."""
    if not out_rate > 0:
        raise ValueError(f"out_rate must be > 0, got {out_rate}")
    if out_rate == waveform.sample_rate:
        return waveform
    ratio = Fraction(out_rate / waveform.sample_rate).limit_denominator(10_000)
    if len(waveform) == 0:
        return Waveform(out_rate, np.empty(0))
    samples = resample_poly(waveform.samples, ratio.numerator, ratio.denominator)
    return Waveform(out_rate, samples)


def normalize_peak(waveform: Waveform, peak: float = 0.9) -> Tuple[Waveform, float]:
    """Scale so max |sample| == peak. Silent input is returned unchanged with gain 1."""
    current = float(np.max(np.abs(waveform.samples))) if len(waveform) else 0.0
    if current == 0.0:
        return waveform, 1.0
    gain = peak / current
    return waveform.with_samples(waveform.samples * gain), gain
