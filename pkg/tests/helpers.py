import numpy as np

from src.events.index import EventStream, SensorGeometry
from src.models.index import RecoveryConfig, ScenarioConfig, SensorModel

# small but flow-friendly scene: grain >= 2r, displacement amplitude >= r
SCENE_SCENARIO = ScenarioConfig(width=24, height=24, grain=16.0, margin=24, gain=16.0, motion_rate=50_000.0)
SCENE_SENSOR = SensorModel(epsilon=0.3)
SCENE_RECOVERY = RecoveryConfig(gate_window=50.0)


def random_stream(rng, n: int, geometry: SensorGeometry, t_span: int) -> EventStream:
    """Sorted random events; a short t_span forces timestamp ties."""
    t = np.sort(rng.integers(0, t_span, size=n))
    x = rng.integers(0, geometry.width, size=n)
    y = rng.integers(0, geometry.height, size=n)
    p = np.where(rng.random(n) < 0.5, -1, 1)
    return EventStream(geometry, t, x, y, p)


def peak_frequency(samples: np.ndarray, sample_rate: float) -> float:
    spectrum = np.abs(np.fft.rfft(samples * np.hanning(samples.size)))
    spectrum[0] = 0.0
    return float(np.fft.rfftfreq(samples.size, 1.0 / sample_rate)[np.argmax(spectrum)])


def level_db(samples: np.ndarray, sample_rate: float, freq_hz: float, tol_hz: float = 3.0) -> float:
    spectrum = np.abs(np.fft.rfft(samples * np.hanning(samples.size)))
    freqs = np.fft.rfftfreq(samples.size, 1.0 / sample_rate)
    return float(20.0 * np.log10(spectrum[np.abs(freqs - freq_hz) <= tol_hz].max() + 1e-12))


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Median of `values` with nonnegative weights; zero-weight entries are ignored."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    keep = weights > 0
    order = np.argsort(values[keep])
    ranked, cumulative = values[keep][order], np.cumsum(weights[keep][order])
    return float(ranked[np.searchsorted(cumulative, 0.5 * cumulative[-1])])
