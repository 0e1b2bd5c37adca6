import argparse

from src.commands.utils import (
    add_global_flags,
    input_format,
    print_summary,
    resolve_config,
    write_run_report,
    write_wav_atomic,
)
from src.config.logging import get_logger
from src.events.index import read_events
from src.middleware.run_context import track_command
from src.recovery.index import recover_from_events

logger = get_logger(__name__)

"""
`recover`

  - recover events.bin --out audio.wav [--mode realtime|offline] ~ audio from the whole sensor
"""


def register(subparsers) -> None:
    parser = subparsers.add_parser("recover", help="recover audio from an events file")
    parser.add_argument("events", help="events file (.csv or .bin)")
    parser.add_argument("--out", required=True, help="output WAV")
    parser.add_argument("--format", choices=["csv", "bin"], help="event file format (default from suffix)")
    add_global_flags(parser)
    parser.set_defaults(handler=cmd_recover)


def recovery_fields(result, event_count: int) -> dict:
    fields = {
        "event_count": event_count,
        "lag": result.lag,
        "sign": result.sign,
        "normalization_gain": result.gain,
        "flow_bins": len(result.flow) if result.flow is not None else 0,
        "output_samples": len(result.waveform),
    }
    fields.update(result.timings)
    return fields


def cmd_recover(args: argparse.Namespace) -> int:
    """
    ! Logic Flow
    * 1. Resolve config and read the events
    * 2. Flow (realtime or offline), then audio recovery
    * 3. Write the WAV atomically and the run report beside it
    """
    cfg = resolve_config(args)
    with track_command("recover", events=args.events, mode=cfg.mode.value) as stats:
        stream = read_events(args.events, input_format(args.events, args.format, cfg))
        result = recover_from_events(stream, cfg)
        write_wav_atomic(result.waveform, args.out)
        fields = recovery_fields(result, len(stream))
        write_run_report(args.out, stats, cfg, fields)
        print_summary(
            [
                ("mode", cfg.mode.value),
                ("events", len(stream)),
                ("samples", len(result.waveform)),
                ("events_per_second", fields.get("events_per_second")),
            ]
        )
    return 0
