import argparse
from typing import Dict, List, Sequence

import numpy as np

from src.commands.utils import add_global_flags, print_summary, resolve_config, write_run_report
from src.config.logging import get_logger
from src.metrics.index import dominant_frequency_track, max_reconstructible_frequency, spectrogram, write_csv_rows
from src.middleware.run_context import track_command
from src.models.index import PipelineConfig
from src.recovery.index import recover_from_events
from src.simulation.index import simulate_scene
from src.simulation.signals import chirp, chirp_frequency_at

logger = get_logger(__name__)

"""
`sweep`

  - sweep --out sweep.csv [--f0 100 --f1 5000 --duration 2]
      ~ one row per input amplitude 0.1..1.0: event count, maximum reconstructible frequency
"""

DEFAULT_AMPLITUDES = [round(0.1 * k, 1) for k in range(1, 11)]
TRACK_FFT = 1024
TRACK_HOP = 256


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="event count and reconstructible bandwidth versus input amplitude")
    parser.add_argument("--out", required=True, help="CSV with one row per amplitude")
    parser.add_argument("--amplitude", type=float, action="append", dest="amplitudes", help="repeatable; default 0.1..1.0")
    parser.add_argument("--f0", type=float, default=100.0, help="chirp start frequency")
    parser.add_argument("--f1", type=float, default=5000.0, help="chirp end frequency")
    parser.add_argument("--duration", type=float, default=2.0, help="chirp length in seconds")
    parser.add_argument("--audio-rate", type=float, default=16_000.0, help="chirp sample rate")
    parser.add_argument("--tol-hz", type=float, default=50.0, help="track tolerance around the chirp line")
    add_global_flags(parser)
    parser.set_defaults(handler=cmd_sweep)


def amplitude_sweep(
    cfg: PipelineConfig,
    amplitudes: Sequence[float],
    f0: float,
    f1: float,
    duration_s: float,
    audio_rate: float = 16_000.0,
    tol_hz: float = 50.0,
) -> List[Dict[str, float]]:
    """
    * Step 1: Simulate the same field driven by the chirp at each amplitude.
    * Step 2: Recover, track the dominant frequency, keep the highest chirp frequency still tracked.
    """
    expected = chirp_frequency_at(f0, f1, duration_s)
    rows = []
    for amplitude in amplitudes:
        stimulus = chirp(f0, f1, duration_s, audio_rate, amplitude)
        stream, _ = simulate_scene(stimulus, cfg.scenario, cfg.sensor)
        max_freq = 0.0
        if len(stream):
            result = recover_from_events(stream, cfg, duration_us=int(round(duration_s * 1e6)))
            spec = spectrogram(result.waveform, TRACK_FFT, TRACK_HOP)
            centers = spec.times() + TRACK_FFT / (2.0 * result.waveform.sample_rate)
            max_freq = max_reconstructible_frequency(dominant_frequency_track(spec), centers, expected, tol_hz)
        logger.info("sweep_point", amplitude=amplitude, event_count=len(stream), max_frequency_hz=round(max_freq, 1))
        rows.append({"amplitude": amplitude, "event_count": len(stream), "max_frequency_hz": round(max_freq, 3)})
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    amplitudes = args.amplitudes or DEFAULT_AMPLITUDES
    if any(not 0 < a <= 1 for a in amplitudes):
        raise ValueError("amplitudes must lie in (0, 1]")
    with track_command("sweep", points=len(amplitudes), mode=cfg.mode.value) as stats:
        rows = amplitude_sweep(cfg, sorted(amplitudes), args.f0, args.f1, args.duration, args.audio_rate, args.tol_hz)
        write_csv_rows(rows, args.out)
        counts = np.array([row["event_count"] for row in rows])
        write_run_report(args.out, stats, cfg, {"points": len(rows), "counts_monotone": bool(np.all(np.diff(counts) >= 0))})
        for row in rows:
            print_summary(row.items())
    return 0
