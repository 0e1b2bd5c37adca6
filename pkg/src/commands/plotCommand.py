import argparse
from pathlib import Path

from src.audio.index import read_wav
from src.commands.utils import print_summary
from src.config.logging import get_logger
from src.metrics.index import (
    dominant_frequency_track,
    spectrogram,
    write_spectrogram_csv,
    write_spectrogram_pgm,
    write_track_csv,
)
from src.middleware.run_context import track_command

logger = get_logger(__name__)

"""
`plot`

  - plot audio.wav --out-prefix plots/audio
      ~ plots/audio.spec.csv, plots/audio.spec.pgm, plots/audio.track.csv
"""


def register(subparsers) -> None:
    parser = subparsers.add_parser("plot", help="spectrogram CSV/PGM and dominant-frequency track of a WAV")
    parser.add_argument("wav", help="input WAV")
    parser.add_argument("--out-prefix", required=True, help="output path prefix")
    parser.add_argument("--fft-size", type=int, default=2048, help="power of two")
    parser.add_argument("--hop", type=int, default=512, help="hop in samples")
    parser.set_defaults(handler=cmd_plot)


def cmd_plot(args: argparse.Namespace) -> int:
    with track_command("plot", wav=args.wav):
        waveform = read_wav(args.wav)
        spec = spectrogram(waveform, args.fft_size, args.hop)
        prefix = args.out_prefix
        write_spectrogram_csv(spec, Path(f"{prefix}.spec.csv"))
        write_spectrogram_pgm(spec, Path(f"{prefix}.spec.pgm"))
        write_track_csv(spec.times(), dominant_frequency_track(spec), Path(f"{prefix}.track.csv"))
        print_summary([("frames", spec.mags.shape[0]), ("bins", spec.freqs.size), ("prefix", prefix)])
    return 0
