import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.signal import butter, correlate, correlation_lags, istft, sosfilt, sosfiltfilt, stft

from src.audio.index import normalize_peak, resample
from src.config.logging import get_logger
from src.events.index import EventStream
from src.exceptions import InsufficientDataError
from src.flow.offline.index import offline_flow_signal
from src.flow.realtime.index import realtime_flow_signal
from src.models.index import PipelineConfig, Projection, RecoveryConfig, RecoveryMode
from src.models.signals import GlobalFlowSignal, Waveform
from src.recovery.utils import DB_EPS, noise_threshold_db, shift_samples, soft_mask

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    waveform: Waveform
    pre_gate: Waveform
    lag: int
    sign: int
    gain: float
    flow: Optional[GlobalFlowSignal] = None
    timings: Dict[str, float] = field(default_factory=dict)


def align_channels(vx: np.ndarray, vy: np.ndarray, max_lag: int) -> Tuple[int, int]:
    """
    Lag in [-max_lag, max_lag] maximising |normalised cross-correlation| of vy against vx,
    plus the correlation sign there. vy[n + lag] lines up with vx[n]. Ties go to the smaller |lag|.
    """
    vx = np.asarray(vx, dtype=np.float64)
    vy = np.asarray(vy, dtype=np.float64)
    if vx.size != vy.size:
        raise ValueError(f"channel lengths differ: {vx.size} != {vy.size}")
    if max_lag < 0:
        raise ValueError(f"max_lag must be >= 0, got {max_lag}")
    norm = np.sqrt(np.dot(vx, vx) * np.dot(vy, vy))
    if norm == 0:
        return 0, 1
    max_lag = min(max_lag, vx.size - 1)
    corr = correlate(vy, vx, mode="full") / norm
    lags = correlation_lags(vy.size, vx.size, mode="full")
    window = np.abs(lags) <= max_lag
    corr, lags = corr[window], lags[window]
    magnitude = np.abs(corr)
    best = np.flatnonzero(magnitude >= magnitude.max() * (1.0 - 1e-12))
    pick = best[np.argmin(np.abs(lags[best]))]
    return int(lags[pick]), 1 if corr[pick] >= 0 else -1


def _project(vx: np.ndarray, vy: np.ndarray, projection: Projection) -> np.ndarray:
    x_silent = not np.any(vx)
    y_silent = not np.any(vy)
    if x_silent and y_silent:
        return np.zeros_like(vx)
    if projection is Projection.PCA:
        stacked = np.vstack([vx, vy])
        _, vectors = np.linalg.eigh(np.cov(stacked))
        principal = vectors[:, -1]
        if principal.sum() < 0:
            principal = -principal
        return principal[0] * vx + principal[1] * vy
    if x_silent:
        return vy
    if y_silent:
        return vx
    return 0.5 * (vx + vy)


def combine_and_integrate(
    vx: np.ndarray,
    vy: np.ndarray,
    lag: int,
    sign: int,
    sample_rate: float,
    projection: Projection = Projection.AVERAGE,
) -> Waveform:
    """Shift vy by lag, apply sign, combine with vx, cumulative sum. Output rate = input bin rate."""
    vx = np.asarray(vx, dtype=np.float64)
    aligned = sign * shift_samples(np.asarray(vy, dtype=np.float64), lag)
    return Waveform(sample_rate, np.cumsum(_project(vx, aligned, projection)))


def combine_blocks(signal: GlobalFlowSignal, cfg: RecoveryConfig) -> Tuple[Waveform, int, int]:
    """Per-block alignment; returns the integrated waveform and the first block's lag/sign."""
    block = cfg.align_block
    combined = np.zeros(len(signal))
    first: Optional[Tuple[int, int]] = None
    for start in range(0, len(signal), block):
        stop = min(start + block, len(signal))
        lag, sign = align_channels(signal.vx[start:stop], signal.vy[start:stop], min(cfg.max_lag, (stop - start) // 2))
        first = first or (lag, sign)
        aligned = sign * shift_samples(np.asarray(signal.vy), lag)[start:stop]
        combined[start:stop] = _project(np.asarray(signal.vx[start:stop]), aligned, cfg.projection)
    lag, sign = first or (0, 1)
    return Waveform(signal.sample_rate, np.cumsum(combined)), lag, sign


def highpass(w: Waveform, cutoff: float, order: int = 4, causal: bool = False) -> Waveform:
    """Butterworth high-pass; forward-backward (zero phase) unless `causal`."""
    nyquist = w.sample_rate / 2.0
    if not 0 < cutoff < nyquist:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")
    if not 10.0 <= cutoff <= 100.0:
        logger.warning("highpass_cutoff_outside_range", hp_cutoff=cutoff, recommended_min=10.0, recommended_max=100.0)
    if len(w) == 0:
        return w
    sos = butter(order, cutoff, btype="highpass", fs=w.sample_rate, output="sos")
    filtered = sosfilt(sos, w.samples) if causal else sosfiltfilt(sos, w.samples)
    return w.with_samples(filtered)


def spectral_gate_denoise(w: Waveform, cfg: RecoveryConfig) -> Waveform:
    """
    Stationary spectral gating.
    * Step 1: Hann STFT, window gate_window ms, 75% overlap.
    * Step 2: Noise threshold per frequency from the signal's own median/MAD in dB.
    * Step 3: Binary mask, smoothed over gate_freq_smooth Hz x gate_time_smooth ms, never below the raw mask.
    * Step 4: Attenuate by gate_strength, inverse STFT, trim to the input length.
    """
    nperseg = max(int(round(cfg.gate_window * 1e-3 * w.sample_rate)), 4)
    if len(w) < 2 * nperseg:
        raise ValueError(f"spectral gate needs at least {2 * nperseg} samples (two windows), got {len(w)}")
    hop = nperseg // 4
    noverlap = nperseg - hop
    freqs, _, spectrum = stft(w.samples, fs=w.sample_rate, window="hann", nperseg=nperseg, noverlap=noverlap)

    db = 20.0 * np.log10(np.abs(spectrum) + DB_EPS)
    freq_step = freqs[1] - freqs[0]
    threshold = noise_threshold_db(db, freq_step, cfg.gate_n_std)
    freq_bins = int(round(cfg.gate_freq_smooth / freq_step))
    time_frames = int(round(cfg.gate_time_smooth * 1e-3 * w.sample_rate / hop))
    mask = soft_mask(db, threshold, freq_bins, time_frames, cfg.gate_strength)

    _, restored = istft(spectrum * mask, fs=w.sample_rate, window="hann", nperseg=nperseg, noverlap=noverlap)
    restored = restored[: len(w)]
    if restored.size < len(w):
        restored = np.pad(restored, (0, len(w) - restored.size))
    logger.debug("spectral_gate_applied", kept_fraction=round(float(mask.mean()), 4), nperseg=nperseg)
    return w.with_samples(restored)


def recover_audio(signal: GlobalFlowSignal, cfg: RecoveryConfig) -> RecoveryResult:
    """
    * Step 1: Align the axes and integrate velocity into displacement.
    * Step 2: High-pass at the flow rate to remove integration drift.
    * Step 3: Resample to out_rate and gate.
    * Step 4: Peak-normalize; the gain is kept in the result.
    """
    if len(signal) < 2:
        raise InsufficientDataError(f"recovery needs at least 2 flow samples, got {len(signal)}")
    try:
        if cfg.align_block:
            integrated, lag, sign = combine_blocks(signal, cfg)
        else:
            max_lag = min(cfg.max_lag, len(signal) // 2)
            lag, sign = align_channels(signal.vx, signal.vy, max_lag)
            integrated = combine_and_integrate(signal.vx, signal.vy, lag, sign, signal.sample_rate, cfg.projection)
        filtered = highpass(integrated, cfg.hp_cutoff, cfg.hp_order, cfg.causal)
        pre_gate = resample(filtered, cfg.out_rate)
        window = int(round(cfg.gate_window * 1e-3 * cfg.out_rate))
        if len(pre_gate) >= 2 * window:
            gated = spectral_gate_denoise(pre_gate, cfg)
        else:
            logger.warning("spectral_gate_skipped", samples=len(pre_gate), required=2 * window)
            gated = pre_gate
        waveform, gain = normalize_peak(gated, cfg.normalize_peak)
    except Exception as e:
        logger.error("audio_recovery_failed", bins=len(signal), error=str(e), exc_info=True)
        raise
    logger.info("audio_recovered", lag=lag, sign=sign, gain=gain, samples=len(waveform), out_rate=cfg.out_rate)
    return RecoveryResult(waveform=waveform, pre_gate=pre_gate, lag=lag, sign=sign, gain=gain, flow=signal)


def flow_signal(stream: EventStream, cfg: PipelineConfig, duration_us: Optional[int] = None) -> GlobalFlowSignal:
    if cfg.mode is RecoveryMode.OFFLINE:
        return offline_flow_signal(stream, cfg.offline.frame_rate, cfg.pyramid, cfg.offline, duration_us)
    return realtime_flow_signal(stream, cfg.flow, duration_us)


def recover_from_events(stream: EventStream, cfg: PipelineConfig, duration_us: Optional[int] = None) -> RecoveryResult:
    """Flow (realtime or offline) followed by recover_audio, with wall-clock timings."""
    started = time.perf_counter()
    signal = flow_signal(stream, cfg, duration_us)
    flow_done = time.perf_counter()
    result = recover_audio(signal, cfg.recovery)
    finished = time.perf_counter()

    flow_seconds = flow_done - started
    timings = {
        "flow_seconds": round(flow_seconds, 6),
        "recovery_seconds": round(finished - flow_done, 6),
        "total_seconds": round(finished - started, 6),
        "events_per_second": round(len(stream) / flow_seconds, 1) if flow_seconds > 0 else 0.0,
    }
    return RecoveryResult(
        waveform=result.waveform,
        pre_gate=result.pre_gate,
        lag=result.lag,
        sign=result.sign,
        gain=result.gain,
        flow=signal,
        timings=timings,
    )
