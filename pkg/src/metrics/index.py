import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Sequence, Union

import cv2
import librosa
import numpy as np

from src.audio.index import resample
from src.config.index import dump_flat_config, parse_flat_config
from src.config.logging import get_logger
from src.exceptions import UndefinedMetricError
from src.metrics.utils import (
    LSD_FFT,
    LSD_FLOOR,
    LSD_HOP,
    MCD_CONSTANT,
    SILENCE_POWER,
    align,
    frame_power,
    is_power_of_two,
    magnitude_frames,
    mel_cepstra,
)
from src.models.signals import Waveform

logger = get_logger(__name__)

METRICS_RATE = 16_000.0


@dataclass(frozen=True, eq=False)
class SpectrogramMatrix:
    """Magnitude STFT; mags is frames x frequency bins."""

    hop: float
    freqs: np.ndarray
    mags: np.ndarray

    def __post_init__(self):
        if self.mags.ndim != 2 or self.mags.shape[1] != self.freqs.size:
            raise ValueError(f"mags {self.mags.shape} inconsistent with {self.freqs.size} frequency bins")
        if np.any(self.mags < 0):
            raise ValueError("magnitudes must be nonnegative")

    def times(self) -> np.ndarray:
        return np.arange(self.mags.shape[0]) * self.hop


@dataclass(frozen=True)
class MetricReport:
    mcd: float
    lsd: float
    aligned_lag: int
    pesq: Optional[float] = None
    stoi: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)

    def to_flat(self) -> Dict[str, object]:
        flat = {k: v for k, v in asdict(self).items() if k != "extras" and v is not None}
        flat.update(self.extras)
        return flat


def spectrogram(w: Waveform, fft_size: int = 2048, hop: int = 512) -> SpectrogramMatrix:
    if not is_power_of_two(fft_size):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if not 0 < hop <= fft_size:
        raise ValueError(f"hop must be in (0, {fft_size}], got {hop}")
    if len(w) < fft_size:
        raise ValueError(f"signal of {len(w)} samples is shorter than fft_size {fft_size}")
    mags = magnitude_frames(w.samples, fft_size, hop)
    freqs = librosa.fft_frequencies(sr=w.sample_rate, n_fft=fft_size)
    return SpectrogramMatrix(hop=hop / w.sample_rate, freqs=freqs, mags=mags)


def dominant_frequency_track(spec: SpectrogramMatrix, rel_floor: float = 1e-3) -> np.ndarray:
    """Per-frame peak frequency in Hz; NaN marks frames below the energy floor."""
    if spec.mags.shape[0] == 0:
        raise ValueError("spectrogram has no frames")
    energy = np.sum(spec.mags ** 2, axis=1)
    floor = max(1e-12, rel_floor * float(energy.max()))
    track = spec.freqs[np.argmax(spec.mags, axis=1)].astype(np.float64)
    track[energy < floor] = np.nan
    return track


def _prepared(ref: Waveform, test: Waveform, rate: float):
    ref = resample(ref, rate)
    test = resample(test, rate)
    a, b, lag = align(ref, test)
    return a, b, lag


def mcd(ref: Waveform, test: Waveform, rate: Optional[float] = None) -> float:
    """Mel cepstral distortion in dB over frames where at least one side is not silent."""
    value, _ = _mcd_with_lag(ref, test, rate)
    return value


def _mcd_with_lag(ref: Waveform, test: Waveform, rate: Optional[float] = None):
    rate = rate or ref.sample_rate
    a, b, lag = _prepared(ref, test, rate)
    frame = int(round(0.025 * rate))
    if a.size < 2 * frame:
        raise ValueError(f"aligned signals too short for MCD ({a.size} samples)")
    ca, pa = mel_cepstra(a, rate)
    cb, pb = mel_cepstra(b, rate)
    voiced = (pa >= SILENCE_POWER) | (pb >= SILENCE_POWER)
    if not np.any(voiced):
        raise UndefinedMetricError("MCD undefined: every frame is silent in both signals")
    distance = np.sqrt(np.sum((ca[voiced] - cb[voiced]) ** 2, axis=1))
    return float(MCD_CONSTANT * distance.mean()), lag


def lsd(ref: Waveform, test: Waveform, rate: float = METRICS_RATE) -> float:
    """Mean over frames of the RMS log10-magnitude difference (fft 2048, hop 512)."""
    value, _ = _lsd_with_lag(ref, test, rate)
    return value


def _lsd_with_lag(ref: Waveform, test: Waveform, rate: float = METRICS_RATE):
    a, b, lag = _prepared(ref, test, rate)
    if a.size < LSD_FFT:
        raise ValueError(f"aligned signals too short for LSD ({a.size} < {LSD_FFT} samples)")
    sa = np.log10(np.maximum(magnitude_frames(a, LSD_FFT, LSD_HOP), LSD_FLOOR))
    sb = np.log10(np.maximum(magnitude_frames(b, LSD_FFT, LSD_HOP), LSD_FLOOR))
    voiced = (frame_power(a, LSD_FFT, LSD_HOP) >= SILENCE_POWER) | (frame_power(b, LSD_FFT, LSD_HOP) >= SILENCE_POWER)
    if not np.any(voiced):
        raise UndefinedMetricError("LSD undefined: every frame is silent in both signals")
    per_frame = np.sqrt(np.mean((sa[voiced] - sb[voiced]) ** 2, axis=1))
    return float(per_frame.mean()), lag


def evaluate(ref: Waveform, test: Waveform, sidecar: Optional[Mapping[str, float]] = None) -> MetricReport:
    """MCD and LSD at 16 kHz after coarse alignment, plus externally computed PESQ/STOI if given."""
    mcd_value, lag = _mcd_with_lag(ref, test, METRICS_RATE)
    lsd_value, _ = _lsd_with_lag(ref, test, METRICS_RATE)
    sidecar = sidecar or {}
    extras = {"snr_db": snr_db(ref, test)} if np.any(ref.samples) else {}
    report = MetricReport(
        mcd=mcd_value,
        lsd=lsd_value,
        aligned_lag=lag,
        pesq=sidecar.get("pesq"),
        stoi=sidecar.get("stoi"),
        extras=extras,
    )
    logger.info("metrics_computed", mcd=round(mcd_value, 4), lsd=round(lsd_value, 4), aligned_lag=lag)
    return report


def snr_db(reference: Waveform, estimate: Waveform) -> float:
    """Scale-free SNR: the estimate is fitted to the reference with one least-squares gain first."""
    estimate = resample(estimate, reference.sample_rate)
    n = min(len(reference), len(estimate))
    r = reference.samples[:n]
    e = estimate.samples[:n]
    energy = float(np.dot(e, e))
    gain = float(np.dot(r, e)) / energy if energy > 0 else 0.0
    noise = r - gain * e
    noise_energy = float(np.dot(noise, noise))
    signal_energy = float(np.dot(r, r))
    if signal_energy == 0:
        raise UndefinedMetricError("SNR undefined for a silent reference")
    if noise_energy == 0:
        return float("inf")
    return float(10.0 * np.log10(signal_energy / noise_energy))


def max_reconstructible_frequency(
    track: np.ndarray,
    times: np.ndarray,
    expected: Callable[[np.ndarray], np.ndarray],
    tol_hz: float = 50.0,
) -> float:
    """Highest expected chirp frequency among frames whose recovered peak is within tol_hz of it; 0 if none."""
    target = np.asarray(expected(np.asarray(times)), dtype=np.float64)
    hits = np.abs(np.asarray(track) - target) <= tol_hz
    hits &= ~np.isnan(track)
    return float(target[hits].max()) if np.any(hits) else 0.0


def read_sidecar(path: Union[str, Path]) -> Dict[str, float]:
    """Externally computed PESQ/STOI values as flat `key = value` lines."""
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as e:
        raise OSError(f"Failed to read sidecar {path}: {e}") from e
    values = parse_flat_config(text, source=str(path))
    unknown = set(values) - {"pesq", "stoi"}
    if unknown:
        raise ValueError(f"{path}: unknown sidecar keys {', '.join(sorted(unknown))}")
    try:
        return {key: float(value) for key, value in values.items()}
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def write_report(values: Mapping[str, object], path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.write_text(dump_flat_config(values), encoding="ascii")
    except OSError as e:
        raise OSError(f"Failed to write report {path}: {e}") from e


def write_csv_rows(rows: Sequence[Mapping[str, object]], path: Union[str, Path]) -> None:
    path = Path(path)
    if not rows:
        raise ValueError("no rows to write")
    with path.open("w", newline="", encoding="ascii") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_spectrogram_csv(spec: SpectrogramMatrix, path: Union[str, Path]) -> None:
    """Header row of bin frequencies, then one row of magnitudes per frame."""
    path = Path(path)
    with path.open("w", newline="", encoding="ascii") as handle:
        handle.write(",".join(f"{f:.6g}" for f in spec.freqs) + "\n")
        np.savetxt(handle, spec.mags, fmt="%.6g", delimiter=",")


def write_spectrogram_pgm(spec: SpectrogramMatrix, path: Union[str, Path], dynamic_range_db: float = 80.0) -> None:
    """8-bit heatmap in dB, low frequencies at the bottom, time left to right."""
    path = Path(path)
    db = 20.0 * np.log10(np.maximum(spec.mags.T, 1e-12))
    top = db.max() if db.size else 0.0
    scaled = np.clip((db - (top - dynamic_range_db)) / dynamic_range_db, 0.0, 1.0)
    image = np.flipud(np.round(scaled * 255.0).astype(np.uint8))
    if not cv2.imwrite(str(path), image):
        raise OSError(f"Failed to write PGM {path}")


def write_track_csv(times: np.ndarray, track: np.ndarray, path: Union[str, Path]) -> None:
    rows = [{"time_s": f"{t:.6f}", "freq_hz": "" if np.isnan(f) else f"{f:.3f}"} for t, f in zip(times, track)]
    path = Path(path)
    with path.open("w", newline="", encoding="ascii") as handle:
        writer = csv.DictWriter(handle, fieldnames=["time_s", "freq_hz"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
