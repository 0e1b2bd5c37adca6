"""
Acceptance Evaluation Script
Runs the simulator closed-loop scenarios over the recordings from collect_data.py
and writes one result row per check.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from evaluation.scripts.collect_data import DATASET_DIR, SCENARIO, SENSOR, collect
from src.audio.index import read_wav
from src.commands.sweepCommand import amplitude_sweep
from src.config.logging import configure_logging, get_logger
from src.events.index import EventStream, Roi, crop_roi, read_events
from src.metrics.index import dominant_frequency_track, lsd, mcd, spectrogram, write_csv_rows
from src.models.index import EventFormat, PipelineConfig, RecoveryConfig, RecoveryMode
from src.models.signals import Waveform
from src.recovery.index import combine_and_integrate, highpass, recover_from_events
from src.simulation.index import simulate_scene
from src.simulation.signals import chirp_frequency_at, silence, tone

configure_logging(log_filename="evaluation.log")
logger = get_logger(__name__)

REALTIME = PipelineConfig(mode=RecoveryMode.REALTIME, scenario=SCENARIO, sensor=SENSOR)
OFFLINE = PipelineConfig(mode=RecoveryMode.OFFLINE, scenario=SCENARIO, sensor=SENSOR)


def spectrum_db(w: Waveform):
    window = np.hanning(len(w))
    mags = np.abs(np.fft.rfft(w.samples * window))
    freqs = np.fft.rfftfreq(len(w), 1.0 / w.sample_rate)
    return freqs, 20.0 * np.log10(np.maximum(mags, 1e-12))


def level_at(freqs, db, target_hz, tol_hz=2.0):
    band = np.abs(freqs - target_hz) <= tol_hz
    return float(db[band].max())


def row(scenario, metric, value, threshold, passed):
    return {"scenario": scenario, "metric": metric, "value": round(float(value), 4), "threshold": threshold, "passed": bool(passed)}


def chirp_round_trip(recordings):
    stream = read_events(recordings["chirp"], EventFormat.BIN)
    result = recover_from_events(stream, OFFLINE, duration_us=5_000_000)
    spec = spectrogram(result.waveform, 1024, 256)
    track = dominant_frequency_track(spec)
    centers = spec.times() + 512 / result.waveform.sample_rate
    expected = chirp_frequency_at(100.0, 5000.0, 5.0)(centers)
    voiced = ~np.isnan(track)
    share = float(np.mean(np.abs(track[voiced] - expected[voiced]) <= 50.0)) if np.any(voiced) else 0.0
    return [row("chirp", "track_within_50hz_share", share, ">= 0.9", share >= 0.9), row("chirp", "events", len(stream), ">= 1e6", len(stream) >= 1e6)]


def paired_tones(recordings):
    stream = read_events(recordings["paired_tones"], EventFormat.BIN)
    result = recover_from_events(stream, OFFLINE, duration_us=4_000_000)
    freqs, db = spectrum_db(result.waveform)
    band = (freqs >= 430) & (freqs <= 450) & (np.abs(freqs - 440) > 0.5) & (np.abs(freqs - 441) > 0.5)
    floor = float(np.median(db[band]))
    margin = min(level_at(freqs, db, 440.0, 0.5), level_at(freqs, db, 441.0, 0.5)) - floor
    return [row("paired_tones", "peak_margin_db", margin, ">= 10", margin >= 10.0)]


def tile_stream(stream: EventStream, min_events: int) -> EventStream:
    """Back-to-back copies of a recording until it holds at least min_events."""
    if len(stream) == 0:
        raise ValueError("cannot tile an empty recording")
    copies = math.ceil(min_events / len(stream))
    period = stream.duration_us
    t = np.concatenate([stream.t + k * period for k in range(copies)])
    return EventStream(
        stream.geometry, t, np.tile(stream.x, copies), np.tile(stream.y, copies), np.tile(stream.p, copies), validate=False
    )


def throughput(recordings):
    long_scene = read_events(recordings["long_chirp"], EventFormat.BIN)
    stream = tile_stream(long_scene, 10_000_000)
    # compile the numba kernels before timing
    recover_from_events(long_scene[:1000], REALTIME, duration_us=long_scene.duration_us)
    result = recover_from_events(stream, REALTIME, duration_us=stream.duration_us)
    rate = result.timings["events_per_second"]

    started = time.perf_counter()
    recover_from_events(read_events(recordings["long_chirp"], EventFormat.BIN), REALTIME, duration_us=10_000_000)
    wall = time.perf_counter() - started
    return [
        row("throughput", "events_timed", len(stream), ">= 1e7", len(stream) >= 10_000_000),
        row("throughput", "realtime_events_per_second", rate, ">= 1e6", rate >= 1e6),
        row("throughput", "ten_second_scene_wall_seconds", wall, "<= 10", wall <= 10.0),
    ]


def offline_vs_realtime(recordings, stimuli_dir):
    reference = read_wav(stimuli_dir / "speech.wav")
    stream = read_events(recordings["speech_noisy"], EventFormat.BIN)
    scores = {}
    for cfg in (REALTIME, OFFLINE):
        recovered = recover_from_events(stream, cfg, duration_us=3_000_000).waveform
        scores[cfg.mode.value] = (lsd(reference, recovered), mcd(reference, recovered))
    baseline = mcd(reference, silence(reference.duration, reference.sample_rate))
    return [
        row("offline_vs_realtime", "offline_lsd_minus_realtime_lsd", scores["offline"][0] - scores["realtime"][0], "<= 0", scores["offline"][0] <= scores["realtime"][0]),
        row("offline_vs_realtime", "offline_mcd_margin", baseline - scores["offline"][1], ">= 3", baseline - scores["offline"][1] >= 3.0),
        row("offline_vs_realtime", "realtime_mcd_margin", baseline - scores["realtime"][1], ">= 3", baseline - scores["realtime"][1] >= 3.0),
    ]


def spot_suppression(stream, rois, tones_hz, label):
    rows = []
    for index, roi in enumerate(rois):
        recovered = recover_from_events(crop_roi(stream, roi), OFFLINE, duration_us=stream.duration_us).waveform
        freqs, db = spectrum_db(recovered)
        own = level_at(freqs, db, tones_hz[index])
        for other_index, other in enumerate(tones_hz):
            if other_index == index:
                continue
            suppression = own - level_at(freqs, db, other)
            rows.append(row(label, f"roi_{roi}_vs_{other:g}hz_suppression_db", suppression, ">= 20", suppression >= 20.0))
    return rows


def demixing(recordings):
    two = read_events(recordings["two_spot"], EventFormat.BIN)
    three = read_events(recordings["three_spot"], EventFormat.BIN)
    return spot_suppression(two, [Roi(0, 0, 64, 64), Roi(64, 0, 64, 64)], [440.0, 660.0], "demix") + spot_suppression(
        three, [Roi(0, 0, 64, 64), Roi(64, 0, 64, 64), Roi(128, 0, 64, 64)], [440.0, 620.0, 810.0], "demix_three_spot"
    )


def sweep():
    rows = amplitude_sweep(OFFLINE, [round(0.1 * k, 1) for k in range(1, 11)], 100.0, 5000.0, 1.0)
    counts = np.array([r["event_count"] for r in rows])
    freqs = np.array([r["max_frequency_hz"] for r in rows])
    return [
        row("sweep", "counts_monotone", float(np.all(np.diff(counts) >= 0)), "1", np.all(np.diff(counts) >= 0)),
        row("sweep", "max_frequency_monotone", float(np.all(np.diff(freqs) >= 0)), "1", np.all(np.diff(freqs) >= 0)),
    ]


def large_motion():
    scenario = SCENARIO.model_copy(update={"gain": 2.0, "drift_px": 200.0, "drift_hz": 1.0, "margin": 210})
    cfg = OFFLINE.model_copy(update={"scenario": scenario})
    stream, _ = simulate_scene(tone(440.0, 2.0, 16_000.0, 1.0), scenario, SENSOR)
    recovered = recover_from_events(stream, cfg, duration_us=2_000_000).pre_gate
    freqs, db = spectrum_db(recovered)
    residual = float(db[(freqs > 0) & (freqs <= 10.0)].max())
    margin = level_at(freqs, db, 440.0) - residual
    return [row("large_motion", "tone_over_low_residual_db", margin, ">= 20", margin >= 20.0)]


def drift_removal():
    rate = 100_000.0
    t = np.arange(int(2 * rate)) / rate
    bias = np.full(t.size, 1e-4)
    tone_velocity = 2 * np.pi * 440.0 * 1e-3 * np.cos(2 * np.pi * 440.0 * t)
    cfg = RecoveryConfig()
    ramp = combine_and_integrate(bias, np.zeros_like(t), 0, 1, rate)
    filtered = highpass(ramp, cfg.hp_cutoff, cfg.hp_order)
    interior = slice(t.size // 10, -t.size // 10)
    ratio = float(np.sqrt(np.mean(filtered.samples[interior] ** 2) / np.mean(ramp.samples[interior] ** 2)))
    mixed = highpass(combine_and_integrate(bias + tone_velocity, np.zeros_like(t), 0, 1, rate), cfg.hp_cutoff, cfg.hp_order)
    clean = combine_and_integrate(tone_velocity, np.zeros_like(t), 0, 1, rate).samples
    clean = clean - clean[interior].mean()
    preserved = float(np.std(mixed.samples[interior]) / np.std(clean[interior]))
    return [
        row("drift_removal", "ramp_rms_ratio", ratio, "< 0.05", ratio < 0.05),
        row("drift_removal", "tone_amplitude_ratio", preserved, "0.95..1.05", abs(preserved - 1.0) <= 0.05),
    ]


def run(dataset_dir: Path = DATASET_DIR) -> list:
    recordings = collect(dataset_dir)
    results = []
    for name, check in (
        ("chirp", lambda: chirp_round_trip(recordings)),
        ("paired_tones", lambda: paired_tones(recordings)),
        ("throughput", lambda: throughput(recordings)),
        ("offline_vs_realtime", lambda: offline_vs_realtime(recordings, dataset_dir)),
        ("demix", lambda: demixing(recordings)),
        ("sweep", sweep),
        ("large_motion", large_motion),
        ("drift_removal", drift_removal),
    ):
        print(f"Evaluating: {name}")
        try:
            results.extend(check())
        except Exception as e:
            logger.error("evaluation_scenario_failed", scenario=name, error=str(e), exc_info=True)
            results.append(row(name, "error", float("nan"), str(e), False))
    return results


if __name__ == "__main__":
    results = run()
    write_csv_rows(results, DATASET_DIR / "results.csv")
    passed = sum(r["passed"] for r in results)
    print(f"\n✅ {passed}/{len(results)} checks passed, detailed results saved to results.csv")
