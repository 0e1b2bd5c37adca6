import argparse

from src.audio.index import read_wav
from src.commands.utils import add_global_flags, event_format_for, print_summary, resolve_config, write_run_report
from src.config.logging import get_logger
from src.events.index import Roi, write_events
from src.middleware.run_context import track_command
from src.models.index import EventFormat
from src.simulation.index import simulate_scene, simulate_spots

logger = get_logger(__name__)

"""
`simulate`

  - simulate --audio in.wav --out events.bin ~ one speckle spot covering the sensor
  - simulate --audio a.wav --roi 0,0,48,96 --audio b.wav --roi 48,0,48,96 --out events.bin
      ~ one independent spot per ROI on a shared sensor (demixing scenes)
"""


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="render the event stream of a vibrating speckle scene")
    parser.add_argument("--audio", action="append", default=[], help="driving WAV (repeat with --roi for multi-spot)")
    parser.add_argument("--roi", action="append", default=[], help="x0,y0,w,h of the spot driven by the matching --audio")
    parser.add_argument("--out", help="events file (.csv or .bin)")
    parser.add_argument("--format", choices=["csv", "bin"], help="event file format (default from suffix)")
    add_global_flags(parser)
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args: argparse.Namespace) -> int:
    """
    ! Logic Flow
    * 1. Resolve config (file < flags) and the audio/ROI pairs
    * 2. Render one full-frame spot, or one spot per ROI
    * 3. Write the events file and the run report beside it
    """
    cfg = resolve_config(args, {"output_events": args.out, "events_format": args.format})
    scenario = cfg.scenario
    audio_paths = args.audio or ([scenario.input_wav] if scenario.input_wav else [])
    if not audio_paths:
        raise ValueError("simulate needs --audio or input_wav in the config")
    if not scenario.output_events:
        raise ValueError("simulate needs --out or output_events in the config")
    if args.roi and len(args.roi) != len(audio_paths):
        raise ValueError(f"{len(audio_paths)} --audio inputs but {len(args.roi)} --roi values")

    with track_command("simulate", audio=",".join(audio_paths), out=scenario.output_events) as stats:
        audios = [read_wav(path) for path in audio_paths]
        if args.roi:
            stream = simulate_spots(audios, [Roi.parse(text) for text in args.roi], scenario, cfg.sensor)
        else:
            if len(audios) > 1:
                raise ValueError("several --audio inputs need one --roi each")
            stream, _ = simulate_scene(audios[0], scenario, cfg.sensor)

        event_format = EventFormat(args.format) if args.format else event_format_for(scenario.output_events, scenario.events_format)
        write_events(stream, scenario.output_events, event_format)
        duration_s = max(a.duration for a in audios)
        rate = len(stream) / duration_s if duration_s > 0 else 0.0
        write_run_report(
            scenario.output_events,
            stats,
            cfg,
            {"event_count": len(stream), "duration_s": round(duration_s, 6), "events_per_second_of_signal": round(rate, 1)},
        )
        print_summary([("events", len(stream)), ("duration_s", round(duration_s, 6)), ("event_rate", round(rate, 1))])
    return 0
