import argparse
from pathlib import Path
from typing import List, Sequence

from src.commands.recoverCommand import recovery_fields
from src.commands.utils import add_global_flags, input_format, print_summary, resolve_config, write_run_report, write_wav_atomic
from src.config.logging import get_logger
from src.events.index import Roi, crop_roi, read_events
from src.middleware.run_context import roi_scope, track_command
from src.recovery.index import recover_from_events

logger = get_logger(__name__)

"""
`demix`

  - demix events.bin --roi 0,0,48,96 --roi 48,0,48,96 --out-prefix out/source
      ~ out/source_roi0.wav, out/source_roi1.wav, one pipeline run per cropped ROI
"""


def register(subparsers) -> None:
    parser = subparsers.add_parser("demix", help="recover one audio source per sensor region")
    parser.add_argument("events", help="events file (.csv or .bin)")
    parser.add_argument("--roi", action="append", required=True, help="x0,y0,w,h; repeat per source")
    parser.add_argument("--out-prefix", required=True, help="WAVs are written as <prefix>_roi<i>.wav")
    parser.add_argument("--format", choices=["csv", "bin"], help="event file format (default from suffix)")
    add_global_flags(parser)
    parser.set_defaults(handler=cmd_demix)


def check_rois(rois: Sequence[Roi]) -> None:
    if not rois:
        raise ValueError("demix needs at least one ROI")
    for i, a in enumerate(rois):
        for b in rois[i + 1:]:
            if a.overlaps(b):
                raise ValueError(f"ROIs {a} and {b} overlap")


def output_paths(prefix: str, count: int) -> List[Path]:
    return [Path(f"{prefix}_roi{i}.wav") for i in range(count)]


def cmd_demix(args: argparse.Namespace) -> int:
    """
    ! Logic Flow
    * 1. Parse and check the ROIs before reading anything
    * 2. Crop each ROI from the full stream and run the whole pipeline on it
    * 3. One WAV and one run report per ROI
    """
    cfg = resolve_config(args)
    rois = [Roi.parse(text) for text in args.roi]
    check_rois(rois)
    outputs = output_paths(args.out_prefix, len(rois))

    with track_command("demix", events=args.events, rois=len(rois), mode=cfg.mode.value) as stats:
        stream = read_events(args.events, input_format(args.events, args.format, cfg))
        for roi, output in zip(rois, outputs):
            with roi_scope(str(roi)):
                cropped = crop_roi(stream, roi)
                logger.info("roi_cropped", event_count=len(cropped))
                # all ROIs share the full recording's time axis
                result = recover_from_events(cropped, cfg, duration_us=stream.duration_us)
                write_wav_atomic(result.waveform, output)
                fields = recovery_fields(result, len(cropped))
                fields["roi"] = str(roi)
                write_run_report(output, stats, cfg, fields)
                print_summary([("roi", str(roi)), ("events", len(cropped)), ("wav", output)])
    return 0
