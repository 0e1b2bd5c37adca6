import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from src.audio.index import resample
from src.config.logging import get_logger
from src.events.index import EventStream, Roi, SensorGeometry, merge, offset
from src.exceptions import OutOfFieldError
from src.models.index import ScenarioConfig, SensorModel
from src.models.signals import MotionTrace, Waveform
from src.simulation.utils import render_pixel_events

logger = get_logger(__name__)

# half-width at half-maximum of a Gaussian-filtered intensity autocorrelation, in filter sigmas
_HWHM_PER_SIGMA = math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True, eq=False)
class SpeckleField:
    """Speckle intensity rendered `margin` pixels beyond the sensor on every side."""

    intensity: np.ndarray
    grain: float
    seed: int
    margin: int

    def __post_init__(self):
        intensity = np.array(self.intensity, dtype=np.float64)
        if intensity.ndim != 2:
            raise ValueError("speckle intensity must be a 2D grid")
        if np.any(intensity < 0):
            raise ValueError("speckle intensity must be nonnegative")
        if not np.any(intensity > 0):
            raise ValueError("speckle intensity needs at least one positive value")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        intensity.setflags(write=False)
        object.__setattr__(self, "intensity", intensity)

    def sensor_geometry(self) -> SensorGeometry:
        rows, cols = self.intensity.shape
        return SensorGeometry(cols - 2 * self.margin, rows - 2 * self.margin)


@dataclass(frozen=True)
class Spot:
    """One laser spot: a speckle field moving on its own region of the sensor."""

    roi: Roi
    field: SpeckleField
    motion: MotionTrace


def generate_speckle(seed: int, geometry: SensorGeometry, grain: float, margin: int) -> SpeckleField:
    """
    Fully developed speckle: low-pass filtered circular complex Gaussian field, intensity = |E|^2,
    normalised to unit mean. The intensity autocorrelation half-width is about `grain` pixels.
    """
    if grain < 1:
        raise ValueError(f"grain must be >= 1, got {grain}")
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")

    rng = np.random.default_rng(seed)
    shape = (geometry.height + 2 * margin, geometry.width + 2 * margin)
    sigma = grain / _HWHM_PER_SIGMA
    real = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="wrap")
    imag = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="wrap")
    intensity = real * real + imag * imag
    intensity /= intensity.mean()
    logger.debug("speckle_generated", seed=seed, rows=shape[0], cols=shape[1], grain=grain, margin=margin)
    return SpeckleField(intensity=intensity, grain=float(grain), seed=int(seed), margin=int(margin))


def _snap(value: float) -> float:
    # cos(90 deg) is 6e-17 in floating point
    return 0.0 if abs(value) < 1e-12 else value


def audio_to_motion(audio: Waveform, gain: float, direction_deg: float) -> MotionTrace:
    if not gain > 0:
        raise ValueError(f"gain must be > 0, got {gain}")
    angle = math.radians(direction_deg)
    cos_a, sin_a = _snap(math.cos(angle)), _snap(math.sin(angle))
    displacement = gain * audio.samples
    return MotionTrace(audio.sample_rate, displacement * cos_a, displacement * sin_a)


def add_drift(motion: MotionTrace, amplitude_px: float, freq_hz: float, direction_deg: float = 0.0) -> MotionTrace:
    """Superimpose slow sinusoidal scene motion on a vibration trace."""
    if amplitude_px == 0:
        return motion
    angle = math.radians(direction_deg)
    t = np.arange(len(motion)) / motion.sample_rate
    drift = amplitude_px * np.sin(2.0 * np.pi * freq_hz * t)
    return MotionTrace(
        motion.sample_rate,
        motion.dx + drift * _snap(math.cos(angle)),
        motion.dy + drift * _snap(math.sin(angle)),
    )


def render_events(field: SpeckleField, motion: MotionTrace, sensor: SensorModel, geometry: SensorGeometry) -> EventStream:
    """
    Contrast-threshold event rendering of a translating speckle field.
    Per pixel, one event per epsilon crossing of log intensity between motion samples,
    timestamps interpolated within the step and floored to whole microseconds.
    """
    if field.sensor_geometry() != geometry:
        raise ValueError(
            f"field covers {field.sensor_geometry()} but sensor geometry is {geometry}"
        )
    largest = motion.max_displacement()
    if largest > field.margin:
        raise OutOfFieldError(
            f"displacement {largest:.3f} px exceeds field margin {field.margin} px"
        )
    if len(motion) < 2:
        return EventStream.empty(geometry)

    t, x, y, p = render_pixel_events(
        field.intensity,
        geometry.width,
        geometry.height,
        field.margin,
        motion.dx,
        motion.dy,
        1e6 / motion.sample_rate,
        sensor.epsilon,
        sensor.floor,
        sensor.refractory_us,
    )
    stream = EventStream(geometry, t, x, y, p, validate=False)
    logger.info(
        "events_rendered",
        event_count=len(stream),
        motion_samples=len(motion),
        duration_s=round(motion.duration, 6),
        width=geometry.width,
        height=geometry.height,
    )
    return stream


def add_noise_events(stream: EventStream, sensor: SensorModel, duration_s: float, seed: int = 0) -> EventStream:
    """Merge Poisson background activity (uniform pixel, polarity and time) into the stream."""
    if sensor.noise_rate == 0 or duration_s <= 0:
        return stream
    geometry = stream.geometry
    rng = np.random.default_rng(seed)
    duration_us = max(int(round(duration_s * 1e6)), 1)
    expected = sensor.noise_rate * duration_s * geometry.width * geometry.height
    count = int(rng.poisson(expected))
    t = np.sort(rng.integers(0, duration_us, size=count))
    x = rng.integers(0, geometry.width, size=count)
    y = rng.integers(0, geometry.height, size=count)
    p = np.where(rng.random(count) < 0.5, -1, 1)
    noise = EventStream(geometry, t, x, y, p, validate=False)
    logger.info("noise_events_added", noise_count=count, expected=round(expected, 3), noise_rate=sensor.noise_rate)
    return merge([stream, noise])


def render_spots(spots: Sequence[Spot], sensor: SensorModel, geometry: SensorGeometry) -> EventStream:
    """Render each spot on its own ROI and merge onto one sensor."""
    for i, a in enumerate(spots):
        if not a.roi.fits(geometry):
            raise ValueError(f"spot ROI {a.roi} outside geometry {geometry.width}x{geometry.height}")
        for b in spots[i + 1:]:
            if a.roi.overlaps(b.roi):
                raise ValueError(f"spot ROIs {a.roi} and {b.roi} overlap")
    if not spots:
        return EventStream.empty(geometry)
    placed = [offset(render_events(s.field, s.motion, sensor, s.roi.geometry()), s.roi, geometry) for s in spots]
    return merge(placed, geometry)


def scenario_motion(audio: Waveform, scenario: ScenarioConfig) -> MotionTrace:
    driven = resample(audio, scenario.motion_rate)
    motion = audio_to_motion(driven, scenario.gain, scenario.direction_deg)
    return add_drift(motion, scenario.drift_px, scenario.drift_hz, scenario.drift_direction_deg)


def simulate_scene(
    audio: Waveform,
    scenario: ScenarioConfig,
    sensor: SensorModel,
    roi: Optional[Roi] = None,
) -> Tuple[EventStream, MotionTrace]:
    """
    * Step 1: Resample the audio to the motion rate and turn it into a global translation (+ drift).
    * Step 2: Synthesize the speckle field for the sensor (or ROI) geometry.
    * Step 3: Render contrast-threshold events and merge background noise.
    """
    geometry = roi.geometry() if roi else SensorGeometry(scenario.width, scenario.height)
    motion = scenario_motion(audio, scenario)
    field = generate_speckle(scenario.seed, geometry, scenario.grain, scenario.margin)
    stream = render_events(field, motion, sensor, geometry)
    stream = add_noise_events(stream, sensor, motion.duration, seed=scenario.seed + 1)
    return stream, motion


def simulate_spots(
    audios: Sequence[Waveform],
    rois: Sequence[Roi],
    scenario: ScenarioConfig,
    sensor: SensorModel,
) -> EventStream:
    """Multi-source scene: one independent field per ROI (seed + index), one shared noise floor."""
    if len(audios) != len(rois):
        raise ValueError(f"{len(audios)} audio inputs for {len(rois)} ROIs")
    geometry = SensorGeometry(scenario.width, scenario.height)
    spots = []
    for index, (audio, roi) in enumerate(zip(audios, rois)):
        field = generate_speckle(scenario.seed + index, roi.geometry(), scenario.grain, scenario.margin)
        spots.append(Spot(roi, field, scenario_motion(audio, scenario)))
    stream = render_spots(spots, sensor, geometry)
    duration = max(s.motion.duration for s in spots) if spots else 0.0
    return add_noise_events(stream, sensor, duration, seed=scenario.seed + len(rois) + 1)
