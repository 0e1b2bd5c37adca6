import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import fftconvolve

# 20*log10 floor for empty STFT cells
DB_EPS = 1e-10
# MAD -> standard deviation for Gaussian data
MAD_TO_STD = 1.4826
# width of the cross-frequency median that keeps narrow tones out of the noise floor
FLOOR_MEDIAN_HZ = 1000.0


def shift_samples(values: np.ndarray, lag: int) -> np.ndarray:
    """out[n] = values[n + lag], zero outside the input."""
    out = np.zeros_like(values)
    n = values.size
    if lag >= 0:
        out[: max(n - lag, 0)] = values[lag:]
    else:
        out[-lag:] = values[: n + lag]
    return out


def triangular(half_width: int) -> np.ndarray:
    k = np.arange(-half_width, half_width + 1)
    return 1.0 - np.abs(k) / (half_width + 1)


def smoothing_kernel(freq_bins: int, time_frames: int) -> np.ndarray:
    kernel = np.outer(triangular(freq_bins), triangular(time_frames))
    return kernel / kernel.sum()


def noise_threshold_db(db: np.ndarray, freq_step_hz: float, n_std: float) -> np.ndarray:
    """
    Per-frequency threshold (column vector) from the signal's own stationary statistics:
    temporal median and MAD per bin, each median-filtered across frequency.
    """
    median = np.median(db, axis=1)
    spread = MAD_TO_STD * np.median(np.abs(db - median[:, None]), axis=1)
    width = max(int(round(FLOOR_MEDIAN_HZ / freq_step_hz)) | 1, 1)
    if width > 1:
        median = median_filter(median, size=width, mode="nearest")
        spread = median_filter(spread, size=width, mode="nearest")
    return (median + n_std * spread)[:, None]


def soft_mask(db: np.ndarray, threshold: np.ndarray, freq_bins: int, time_frames: int, strength: float) -> np.ndarray:
    raw = (db > threshold).astype(np.float64)
    if freq_bins > 0 or time_frames > 0:
        smoothed = np.clip(fftconvolve(raw, smoothing_kernel(freq_bins, time_frames), mode="same"), 0.0, 1.0)
        raw = np.maximum(raw, smoothed)
    return 1.0 - strength * (1.0 - raw)
