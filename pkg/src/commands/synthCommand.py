import argparse

from src.commands.utils import print_summary, write_wav_atomic
from src.config.logging import get_logger
from src.middleware.run_context import track_command
from src.simulation.signals import c_octaves, chirp, silence, speech_like, tone, tones

logger = get_logger(__name__)

"""
`synth`

  - synth tone --freq 440 --duration 2 --out a440.wav
  - synth tones --freq 440 --freq 441 --duration 4 --out pair.wav
  - synth chirp --f0 100 --f1 5000 --duration 5 --out chirp.wav
  - synth octaves | speech | silence --out ...
"""

KINDS = ["tone", "tones", "chirp", "octaves", "speech", "silence"]


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="write a stimulus WAV")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--out", required=True, help="output WAV")
    parser.add_argument("--freq", type=float, action="append", default=[], help="tone frequency in Hz (repeatable)")
    parser.add_argument("--f0", type=float, default=100.0, help="chirp start frequency")
    parser.add_argument("--f1", type=float, default=5000.0, help="chirp end frequency")
    parser.add_argument("--duration", type=float, default=2.0, help="seconds (per note for octaves)")
    parser.add_argument("--rate", type=float, default=16_000.0, help="sample rate in Hz")
    parser.add_argument("--amplitude", type=float, default=0.9, help="peak amplitude")
    parser.add_argument("--seed", type=int, default=0, help="seed for speech-like noise")
    parser.set_defaults(handler=cmd_synth)


def build_stimulus(args: argparse.Namespace):
    if args.kind == "tone":
        return tone(args.freq[0] if args.freq else 440.0, args.duration, args.rate, args.amplitude)
    if args.kind == "tones":
        return tones(args.freq or [440.0, 441.0], args.duration, args.rate, args.amplitude)
    if args.kind == "chirp":
        return chirp(args.f0, args.f1, args.duration, args.rate, args.amplitude)
    if args.kind == "octaves":
        return c_octaves(args.duration, args.rate, args.amplitude)
    if args.kind == "speech":
        return speech_like(args.duration, args.rate, args.amplitude, args.seed)
    return silence(args.duration, args.rate)


def cmd_synth(args: argparse.Namespace) -> int:
    with track_command("synth", kind=args.kind, out=args.out):
        waveform = build_stimulus(args)
        write_wav_atomic(waveform, args.out)
        print_summary([("kind", args.kind), ("samples", len(waveform)), ("rate", waveform.sample_rate)])
    return 0
